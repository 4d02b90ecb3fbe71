"""
Tests for evaluation metrics.
"""

import pytest

from services.errors import InputError
from services.metrics import band_of, compute_metrics


@pytest.fixture
def scored():
    templates = ['parent', 'parent', 'child', 'child', 'collider', 'collider', 'confounder', 'confounder']
    gold = [1, 0, 1, 1, 0, 0, 1, 0]
    pred = [1, 0, 0, 1, 0, 1, 1, 1]
    depths = [7, 8, 12, 13, 17, 18, 22, 24]
    return compute_metrics(pred, gold, templates, depths)


class TestComputeMetrics:
    """Aggregate scores."""

    def test_per_template_f1(self, scored):
        assert scored.per_template_f1['parent'] == pytest.approx(100.0)
        assert scored.per_template_f1['child'] == pytest.approx(200 / 3)
        assert scored.per_template_f1['collider'] == pytest.approx(0.0)
        assert scored.per_template_f1['confounder'] == pytest.approx(200 / 3)

    def test_macro_f1_over_present_templates(self, scored):
        assert scored.macro_f1 == pytest.approx(175 / 3)
        assert scored.missing_templates == ['ancestor', 'descendant']

    def test_accuracy(self, scored):
        assert scored.accuracy == pytest.approx(62.5)
        assert scored.rejection_accuracy == pytest.approx(50.0)
        assert scored.n_instances == 8

    def test_band_accuracy(self, scored):
        assert scored.band_accuracy == {
            '7-10': pytest.approx(100.0),
            '11-15': pytest.approx(50.0),
            '16-20': pytest.approx(50.0),
            '21-24': pytest.approx(50.0)
        }

    def test_no_positives_and_no_false_alarms_scores_full(self):
        report = compute_metrics([0, 0], [0, 0], ['ancestor', 'ancestor'], [9, 9])
        assert report.per_template_f1 == {'ancestor': pytest.approx(100.0)}
        assert report.band_accuracy['11-15'] is None

    def test_no_negatives(self):
        report = compute_metrics([1], [1], ['parent'], [7])
        assert report.rejection_accuracy is None

    def test_convergence_statistics(self):
        report = compute_metrics([1, 0, 1], [1, 0, 0], ['parent'] * 3, [7, 7, 7],
                                 rounds=[2, 4, 9], converged=[True, True, False])
        assert report.mean_rounds == pytest.approx(5.0)
        assert report.median_rounds == pytest.approx(4.0)
        assert report.fraction_converged == pytest.approx(2 / 3)
        assert report.to_dict()['convergence']['median_rounds'] == pytest.approx(4.0)

    def test_empty(self):
        with pytest.raises(InputError):
            compute_metrics([], [], [], [])

    def test_misaligned(self):
        with pytest.raises(InputError):
            compute_metrics([1, 0], [1], ['parent', 'child'], [7, 8])

    def test_misaligned_rounds(self):
        with pytest.raises(InputError):
            compute_metrics([1], [1], ['parent'], [7], rounds=[1, 2])

    def test_unknown_template(self):
        with pytest.raises(InputError):
            compute_metrics([1], [1], ['sibling'], [7])


class TestDepthBands:
    """Band lookup."""

    @pytest.mark.parametrize('d,expected', [
        (6, None),
        (7, '7-10'),
        (10, '7-10'),
        (15, '11-15'),
        (20, '16-20'),
        (24, '21-24'),
        (25, None)
    ])
    def test_band_of(self, d, expected):
        assert band_of(d) == expected
