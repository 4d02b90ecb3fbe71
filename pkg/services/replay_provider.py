"""
Transcript recording and replay.

Each LLM-mode query is written as one JSONL record
{query_id, prompt_sha256, votes, answer, model, timestamp}. Queries made
inside an experiment run also carry instance_id, trial and round, and
replay serves those per (instance_id, trial, prompt hash) so concurrent
runs sharing a prompt never swap answers. Untagged records are looked up
by prompt hash alone. Repeated prompts are served in recording order.
"""

import copy
import hashlib
import json
import logging
import threading
from collections import defaultdict, deque
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Union

from .dag_core import SeedLike
from .errors import ParseError, TranscriptIncompleteError
from .oracle_service import (
    InterventionalOracle,
    OracleConfig,
    OracleQuery,
    OracleResponse,
    render_intervention_prompt,
)

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = {'prompt_sha256', 'votes', 'answer'}

RunKey = tuple[Optional[str], Optional[int]]
UNBOUND: RunKey = (None, None)


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode('utf-8')).hexdigest()


class TranscriptWriter:
    """Append-only JSONL transcript, safe to share between threads."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._count = sum(1 for _ in self.path.open(encoding='utf-8')) if self.path.exists() else 0

    def record(self, prompt: str, response: OracleResponse, model: str,
               run_key: RunKey = UNBOUND, round_index: Optional[int] = None) -> dict:
        """
        Append one query record.

        Args:
            prompt: Prompt sent for every vote
            response: Majority answer with its votes in vote-index order
            model: Model name
            run_key: (instance_id, trial) of the run the query belongs to
            round_index: 1-based round within that run
        """
        instance_id, trial = run_key
        with self._lock:
            self._count += 1
            entry = {
                'query_id': f"q{self._count:06d}",
                'prompt_sha256': prompt_sha256(prompt),
                'votes': list(response.votes),
                'answer': response.answer,
                'model': model,
                'timestamp': datetime.now(timezone.utc).isoformat()
            }
            if instance_id is not None:
                entry.update(instance_id=instance_id, trial=trial, round=round_index)
            with self.path.open('a', encoding='utf-8') as fh:
                fh.write(json.dumps(entry) + '\n')
        return entry


def load_transcript(path: Union[str, Path]) -> list[dict]:
    """
    Read a transcript file.

    Raises:
        ParseError: On a malformed line (position is the 1-based line number)
    """
    records = []
    with Path(path).open(encoding='utf-8') as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"Malformed transcript record: {e}", position=line_no)
            if not isinstance(record, dict) or not REQUIRED_FIELDS <= record.keys():
                raise ParseError(f"Transcript record lacks one of {sorted(REQUIRED_FIELDS)}", position=line_no)
            records.append(record)
    return records


def record_run_key(record: dict) -> RunKey:
    instance_id = record.get('instance_id')
    if instance_id is None:
        return UNBOUND
    return str(instance_id), int(record.get('trial') or 0)


class ReplayOracle(InterventionalOracle):
    """Serves recorded responses verbatim."""

    def __init__(self, records: list[dict], config: OracleConfig, model: str = 'replay'):
        self._config = config
        self._model = model
        self._run_key: RunKey = UNBOUND
        self._lock = threading.Lock()
        self._queue: dict[tuple, deque] = defaultdict(deque)
        for record in records:
            self._queue[(*record_run_key(record), record['prompt_sha256'])].append(record)

    @classmethod
    def from_file(cls, path: Union[str, Path], config: OracleConfig) -> 'ReplayOracle':
        records = load_transcript(path)
        logger.info(f"Loaded {len(records)} transcript records from {path}")
        model = records[0].get('model', 'replay') if records else 'replay'
        return cls(records, config, model=model)

    @property
    def model_name(self) -> str:
        return self._model

    def bind(self, instance_id: str, trial: int) -> 'ReplayOracle':
        # Bound views share the queues and the lock
        view = copy.copy(self)
        view._run_key = (instance_id, trial)
        return view

    def query(self, q: OracleQuery, rng_seed: SeedLike = None) -> OracleResponse:
        key = prompt_sha256(render_intervention_prompt(q))
        with self._lock:
            pending = self._queue.get((*self._run_key, key))
            if not pending and self._run_key != UNBOUND:
                pending = self._queue.get((*UNBOUND, key))
            if not pending:
                raise TranscriptIncompleteError(
                    f"Transcript has no record for do({q.premise.names[q.intervention.target]}) "
                    f"-> {q.premise.names[q.observed]} (prompt {key[:12]}, run {self._run_key})"
                )
            record = pending.popleft()
        return OracleResponse(answer=int(record['answer']), votes=tuple(record['votes']))
