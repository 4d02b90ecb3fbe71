"""
English rendering and parsing of premises and hypotheses.

Premise grammar (sentences separated by single spaces):

    Suppose there is a closed system of 4 variables A, B, C, and D. All the
    statistical relations among these 4 variables are as follows: A correlates
    with B. ... However, B and D are independent given A. ...

Two policies choose which independence statements are rendered:
FULL lists every conditional independence up to d - 2 conditioning
variables, MINIMAL lists one smallest separating set (size <= 3) per
marginally dependent, non-adjacent pair.
"""

import itertools
import logging
import re
from enum import Enum
from typing import Sequence, Union

from .dag_core import Dag, RelationTemplate
from .errors import InputError, ParseError
from .indep_engine import CiStatement, Hypothesis, PremiseSet, all_ci_statements, d_separated, minimal_separator

logger = logging.getLogger(__name__)

MINIMAL_MAX_COND = 3

HEADER_TEMPLATE = (
    "Suppose there is a closed system of {d} {noun} {names}. "
    "All the statistical relations among these {d} {noun} are as follows:"
)
HEADER_PATTERN = re.compile(
    r"^Suppose there is a closed system of (\d+) variables? (.+?)\. "
    r"All the statistical relations among these \1 variables? are as follows:\s*"
)
CORRELATION_PATTERN = re.compile(r"^(\S+) correlates with (\S+)\.$")
INDEPENDENCE_PATTERN = re.compile(r"^(\S+) and (\S+) are independent(?: given (.+))?\.$")
HOWEVER = "However, "

HYPOTHESIS_TEMPLATES = {
    RelationTemplate.PARENT: "{a} directly causes {b}.",
    RelationTemplate.CHILD: "{a} is directly caused by {b}.",
    RelationTemplate.ANCESTOR: "{a} causes something else which causes {b}.",
    RelationTemplate.DESCENDANT: "{a} is caused by something else which is caused by {b}.",
    RelationTemplate.COLLIDER: "There exists at least one collider (i.e., common effect) of {a} and {b}.",
    RelationTemplate.CONFOUNDER: "There exists at least one confounder (i.e., common cause) of {a} and {b}.",
}


class CiPolicy(str, Enum):
    FULL = 'full'
    MINIMAL = 'minimal'


def join_names(names: Sequence[str]) -> str:
    """'A', 'A and B', 'A, B, and C'."""
    if not names:
        raise InputError("Cannot render an empty variable list")
    if len(names) == 1:
        return names[0]
    if len(names) == 2:
        return f"{names[0]} and {names[1]}"
    return ', '.join(names[:-1]) + f", and {names[-1]}"


def split_names(text: str) -> list[str]:
    """Inverse of join_names."""
    if ', ' in text:
        parts = text.split(', ')
        if not parts[-1].startswith('and '):
            raise ParseError(f"Variable list {text!r} is missing its final 'and'")
        parts[-1] = parts[-1][len('and '):]
    elif ' and ' in text:
        parts = text.split(' and ')
    else:
        parts = [text]
    if any(not p or ' ' in p for p in parts):
        raise ParseError(f"Malformed variable list {text!r}")
    return parts


def select_statements(g: Dag, policy: Union[str, CiPolicy] = CiPolicy.MINIMAL,
                      max_cond: int = MINIMAL_MAX_COND) -> list[CiStatement]:
    """
    Statements a premise of g states, in rendering order.

    Every pair gets its marginal statement (correlation or independence).
    Conditional independencies follow according to the policy. Conditional
    dependencies are never stated.
    """
    policy = CiPolicy(policy)
    d = g.num_vars
    marginal = [CiStatement(x, y, frozenset(), d_separated(g, x, y))
                for x, y in itertools.combinations(range(d), 2)]
    if policy is CiPolicy.FULL:
        conditional = [s for s in all_ci_statements(g, max(d - 2, 0)) if s.cond and s.independent]
    else:
        conditional = []
        for s in marginal:
            if s.independent:
                continue
            sep = minimal_separator(g, s.x, s.y, max_cond)
            if sep:
                conditional.append(CiStatement(s.x, s.y, frozenset(sep), True))
    correlations = [s for s in marginal if not s.independent]
    independences = sorted(
        [s for s in marginal if s.independent] + conditional,
        key=lambda s: (s.x, s.y, len(s.cond), tuple(sorted(s.cond)))
    )
    return correlations + independences


def _sentence(s: CiStatement, names: Sequence[str]) -> str:
    x, y = names[s.x], names[s.y]
    if not s.independent:
        if s.cond:
            raise InputError("Conditional dependence statements have no sentence form")
        return f"{x} correlates with {y}."
    if not s.cond:
        return f"{x} and {y} are independent."
    return f"{x} and {y} are independent given {join_names([names[c] for c in sorted(s.cond)])}."


def premise_text(p: PremiseSet) -> str:
    """Render a PremiseSet; a 'However,' prefix opens the independence block after correlations."""
    d = p.num_vars
    noun = 'variable' if d == 1 else 'variables'
    parts = [HEADER_TEMPLATE.format(d=d, noun=noun, names=join_names(p.names))]
    seen_correlation = False
    opened = False
    for s in p.statements:
        sentence = _sentence(s, p.names)
        if not s.independent:
            seen_correlation = True
        elif seen_correlation and not opened:
            sentence = HOWEVER + sentence
            opened = True
        parts.append(sentence)
    return ' '.join(parts)


def render_premise(g: Dag, policy: Union[str, CiPolicy] = CiPolicy.MINIMAL,
                   max_cond: int = MINIMAL_MAX_COND) -> tuple[str, PremiseSet]:
    """
    Render g's premise as text together with the PremiseSet it encodes.

    Args:
        g: Generating graph
        policy: FULL or MINIMAL statement selection
        max_cond: Largest separating set MINIMAL looks for

    Returns:
        Tuple of (premise text, PremiseSet)
    """
    premise = PremiseSet(g.num_vars, tuple(select_statements(g, policy, max_cond)), g.names)
    return premise_text(premise), premise


def _split_sentences(body: str) -> list[str]:
    return [s for s in re.split(r'(?<=\.) ', body.strip()) if s]


def parse_premise(text: str) -> PremiseSet:
    """
    Parse premise text back into a PremiseSet.

    Raises:
        ParseError: On an empty text, a malformed sentence (position is the
                    1-based sentence number) or an unknown variable
    """
    if not text or not text.strip():
        raise ParseError("Premise text is empty", position=0)
    header = HEADER_PATTERN.match(text.strip())
    if header is None:
        raise ParseError("Premise does not start with the closed-system header", position=1)
    d = int(header.group(1))
    names = split_names(header.group(2))
    if len(names) != d:
        raise ParseError(f"Header announces {d} variables but lists {len(names)}", position=1)
    index = {name: k for k, name in enumerate(names)}

    def lookup(name: str, position: int) -> int:
        if name not in index:
            raise ParseError(f"Unknown variable {name!r}", position=position)
        return index[name]

    statements = []
    for position, sentence in enumerate(_split_sentences(text.strip()[header.end():]), start=2):
        if sentence.startswith(HOWEVER):
            sentence = sentence[len(HOWEVER):]
        match = CORRELATION_PATTERN.match(sentence)
        try:
            if match:
                statements.append(CiStatement(lookup(match.group(1), position),
                                              lookup(match.group(2), position), frozenset(), False))
                continue
            match = INDEPENDENCE_PATTERN.match(sentence)
            if match is None:
                raise ParseError(f"Unrecognized sentence {sentence!r}", position=position)
            cond = frozenset(lookup(n, position) for n in split_names(match.group(3))) if match.group(3) else frozenset()
            statements.append(CiStatement(lookup(match.group(1), position),
                                          lookup(match.group(2), position), cond, True))
        except ParseError as e:
            if e.position is None:
                raise ParseError(str(e), position=position)
            raise
        except InputError as e:
            raise ParseError(str(e), position=position)
    try:
        return PremiseSet(d, tuple(statements), tuple(names))
    except InputError as e:
        raise ParseError(str(e))


def hypothesis_text(h: Hypothesis, names: Sequence[str]) -> str:
    return HYPOTHESIS_TEMPLATES[h.template].format(a=names[h.a], b=names[h.b])


def _hypothesis_patterns() -> list[tuple[RelationTemplate, re.Pattern]]:
    patterns = []
    for template, text in HYPOTHESIS_TEMPLATES.items():
        escaped = re.escape(text).replace(r'\{a\}', r'(?P<a>\S+)').replace(r'\{b\}', r'(?P<b>\S+)')
        patterns.append((template, re.compile(f"^{escaped}$")))
    return patterns


_HYPOTHESIS_PATTERNS = _hypothesis_patterns()


def parse_hypothesis(text: str, names: Sequence[str]) -> Hypothesis:
    """
    Parse one of the six hypothesis sentences.

    Raises:
        ParseError: If the sentence matches no template or names an unknown variable
    """
    cleaned = ' '.join(text.split())
    index = {name: k for k, name in enumerate(names)}
    for template, pattern in _HYPOTHESIS_PATTERNS:
        match = pattern.match(cleaned)
        if match is None:
            continue
        a, b = match.group('a'), match.group('b')
        if a not in index or b not in index:
            raise ParseError(f"Hypothesis names an unknown variable: {text!r}")
        try:
            return Hypothesis(template, index[a], index[b])
        except InputError as e:
            raise ParseError(str(e))
    raise ParseError(f"Hypothesis matches no relation template: {text!r}")
