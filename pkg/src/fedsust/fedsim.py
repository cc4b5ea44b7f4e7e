"""Deterministic federation simulator: sampling, pseudo-training, aggregation.

No real learning happens here. Each round the server draws a client subset,
every drawn client produces a hash-derived perturbation of the broadcast
model vector, the server averages the updates, and every phase is priced by
the TDP-based emissions estimator. Outputs are bit-reproducible functions of
``(config, seed)``, including under internal parallelism.

Client selection stream
-----------------------
The per-round randomness is a counter-based SHA-256 keystream, documented
here so it can be reimplemented independently:

* block ``k`` of round ``t`` is
  ``SHA-256(b"fedsust-sample" || seed || t || k)`` with ``seed``, ``t`` and
  ``k`` big-endian unsigned 8-byte integers, ``k`` starting at 0;
* each 32-byte digest yields four big-endian unsigned 64-bit words,
  consumed in order, moving to the next block when exhausted;
* the round's subset is a partial Fisher-Yates shuffle of
  ``[0, ..., N-1]``: for ``i = 0 .. m-1``, draw word ``w`` and swap
  positions ``i`` and ``i + (w mod (N - i))``; the first ``m`` positions,
  sorted ascending, are the selected clients.

Model perturbations and synthetic label splits use numpy's Philox bit
generator keyed from analogous SHA-256 digests (one matrix per round, rows
in selected-client order); they do not need to be reimplementable, only
reproducible.
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import FederationConfig
from .emissions import EmissionRecord, EmissionsLog, energy_to_co2, track_phase
from .refdata import HardwareProfile, ReferenceTables

logger = logging.getLogger(__name__)

__all__ = [
    "ClientStatistics",
    "FederationState",
    "MODEL_VECTOR_CAP",
    "SelectionStream",
    "SimulationError",
    "accumulate_class_distribution",
    "aggregate_model",
    "client_class_counts",
    "hash_client_id",
    "hash_label",
    "run_federation",
    "run_salt",
    "sample_clients",
]

# Declared model sizes can be astronomically larger than anything worth
# materializing; the scored raw value stays the declared size.
MODEL_VECTOR_CAP = 4096

_SAMPLE_TAG = b"fedsust-sample"
_TRAIN_TAG = b"fedsust-train"
_LABEL_TAG = b"fedsust-labels"
_SALT_TAG = b"fedsust-salt"

_PERTURBATION_STEP = 0.1


class SimulationError(ValueError):
    """Invalid simulator input."""


class SelectionStream:
    """Counter-based 64-bit word stream for one round's client draw."""

    def __init__(self, seed: int, round_index: int):
        if not 0 <= seed < 2**64:
            raise SimulationError(f"seed must be an unsigned 64-bit integer, got {seed}")
        if round_index < 0:
            raise SimulationError(f"round index must be >= 0, got {round_index}")
        self._prefix = _SAMPLE_TAG + seed.to_bytes(8, "big") + round_index.to_bytes(8, "big")
        self._counter = 0
        self._words: list[int] = []

    def next_u64(self) -> int:
        if not self._words:
            block = hashlib.sha256(self._prefix + self._counter.to_bytes(8, "big")).digest()
            self._counter += 1
            self._words = [int.from_bytes(block[i : i + 8], "big") for i in (0, 8, 16, 24)]
        return self._words.pop(0)


def sample_clients(num_clients: int, sample_size: int, stream: SelectionStream) -> tuple[int, ...]:
    """Draw a uniform ``sample_size``-subset of ``range(num_clients)``, sorted."""
    if sample_size < 1 or sample_size > num_clients:
        raise SimulationError(
            f"sample size {sample_size} must lie in [1, num_clients={num_clients}]"
        )
    idx = list(range(num_clients))
    for i in range(sample_size):
        j = i + stream.next_u64() % (num_clients - i)
        idx[i], idx[j] = idx[j], idx[i]
    return tuple(sorted(idx[:sample_size]))


def aggregate_model(updates: list[np.ndarray]) -> np.ndarray:
    """Element-wise arithmetic mean of equal-length parameter vectors."""
    if not updates:
        raise SimulationError("cannot aggregate an empty update list")
    length = len(updates[0])
    for i, update in enumerate(updates):
        if len(update) != length:
            raise SimulationError(
                f"update {i} has length {len(update)}, expected {length}"
            )
    stacked = np.stack([np.asarray(u, dtype=np.float64) for u in updates])
    return stacked.mean(axis=0)


def run_salt(seed: int) -> bytes:
    """Per-run hashing salt, derived from the seed and recorded nowhere."""
    return hashlib.sha256(_SALT_TAG + seed.to_bytes(8, "big")).digest()


def hash_client_id(salt: bytes, client_index: int) -> str:
    """Salted hash under which a client appears in any output."""
    return hashlib.sha256(salt + b"client:" + client_index.to_bytes(8, "big")).hexdigest()[:16]


def hash_label(salt: bytes, label: str) -> str:
    """Salted hash under which a class label appears in any output."""
    return hashlib.sha256(salt + b"label:" + label.encode("utf-8")).hexdigest()[:16]


def _philox(tag: bytes, seed: int, *parts: int) -> np.random.Generator:
    material = tag + seed.to_bytes(8, "big") + b"".join(p.to_bytes(8, "big") for p in parts)
    digest = hashlib.sha256(material).digest()
    key = [int.from_bytes(digest[0:8], "big"), int.from_bytes(digest[8:16], "big")]
    return np.random.Generator(np.random.Philox(key=key))


def client_class_counts(seed: int, client_index: int, dataset_size: int, num_classes: int) -> dict[str, int]:
    """Synthetic per-class sample counts of one client's local dataset.

    Proportions are hash-derived (so fleets are label-imbalanced, as real
    federations are) and rounded by largest remainder, preserving
    ``sum(counts) == dataset_size`` exactly.
    """
    gen = _philox(_LABEL_TAG, seed, client_index)
    props = gen.random(num_classes)
    props = props / props.sum()
    raw = props * dataset_size
    counts = np.floor(raw).astype(np.int64)
    shortfall = int(dataset_size - counts.sum())
    if shortfall:
        order = sorted(range(num_classes), key=lambda c: (-(raw[c] - counts[c]), c))
        for c in order[:shortfall]:
            counts[c] += 1
    return {f"class_{c}": int(counts[c]) for c in range(num_classes) if counts[c] > 0}


def accumulate_class_distribution(
    distribution: dict[str, int],
    client_labels: dict[str, int],
    salt: bytes,
    hash_registry: dict[str, str] | None = None,
) -> dict[str, int]:
    """Fold one client's label counts into the federation-wide hashed map.

    Labels are hashed before they enter the shared map; only collision
    detection (two distinct labels hashing alike) is logged, never raised.
    """
    for label, count in client_labels.items():
        hashed = hash_label(salt, label)
        if hash_registry is not None:
            known = hash_registry.get(hashed)
            if known is not None and known != label:
                logger.warning("label hash collision: %r and %r both map to %s", known, label, hashed)
            hash_registry[hashed] = label
        distribution[hashed] = distribution.get(hashed, 0) + int(count)
    return distribution


@dataclass
class ClientStatistics:
    """Per-client summary reported at the end of a run."""

    participation_rate: float
    avg_training_time_s: float
    dataset_size: int
    class_balance: dict[str, int]


@dataclass
class FederationState:
    """Final simulator state after the last round."""

    round: int
    model: np.ndarray
    selection_counts: dict[int, int]
    class_distribution: dict[str, int]
    emissions: EmissionsLog
    client_countries: list[str]
    client_hardware: list[str]
    statistics: dict[int, ClientStatistics] = field(default_factory=dict)


def _assign_by_share(mix: tuple[tuple[float, str], ...], population: int) -> list[str]:
    """Deterministic largest-remainder assignment of share mixes to clients."""
    raw = [share * population for share, _ in mix]
    counts = [math.floor(r) for r in raw]
    shortfall = population - sum(counts)
    order = sorted(range(len(mix)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:shortfall]:
        counts[i] += 1
    assigned: list[str] = []
    for (_, value), count in zip(mix, counts):
        assigned.extend([value] * count)
    return assigned


def _train_duration(config: FederationConfig) -> float:
    em = config.energy_model
    return em.train_seconds_per_unit * config.local_rounds * config.dataset_size * (config.model_size / 1e6)


def _agg_duration(config: FederationConfig) -> float:
    em = config.energy_model
    return em.agg_seconds_per_unit * config.sample_size * (config.model_size / 1e6)


def _round_deltas(seed: int, round_index: int, count: int, length: int) -> np.ndarray:
    """Perturbations applied by this round's selected clients, one row each."""
    gen = _philox(_TRAIN_TAG, seed, round_index)
    return gen.uniform(-_PERTURBATION_STEP, _PERTURBATION_STEP, size=(count, length))


def run_federation(
    config: FederationConfig,
    tables: ReferenceTables | None = None,
    workers: int = 1,
) -> FederationState:
    """Execute the orchestration loop for ``config.total_rounds`` rounds.

    Per round: draw ``sample_size`` clients without replacement, perturb the
    broadcast model once per drawn client, track a training record per drawn
    client (plus a communication record when communication energy is priced),
    average the updates, and track one server aggregation record. Client
    phases within a round may run on ``workers`` threads; rounds are a strict
    barrier, and all accumulation is merged in client order, so results do
    not depend on ``workers``.
    """
    if workers < 1:
        raise SimulationError(f"workers must be >= 1, got {workers}")
    tables = tables or ReferenceTables.load()

    n = config.num_clients
    m = config.sample_size
    seed = config.seed
    salt = run_salt(seed)

    countries = _assign_by_share(config.client_locations, n)
    countries = [tables.locations.resolve(c, tables.grid) for c in countries]
    hardware_names = _assign_by_share(config.client_hardware, n)
    client_hw: list[HardwareProfile] = [tables.hardware.lookup(hw) for hw in hardware_names]
    client_intensity = [tables.grid.lookup_intensity(c) for c in countries]
    server_hw = tables.hardware.lookup(config.server_hardware)
    server_country = tables.locations.resolve(config.server_location, tables.grid)
    server_intensity = tables.grid.lookup_intensity(server_country)

    log = EmissionsLog()
    selection_counts: dict[int, int] = {c: 0 for c in range(n)}
    class_distribution: dict[str, int] = {}
    hash_registry: dict[str, str] = {}
    client_labels: list[dict[str, int]] = []
    for c in range(n):
        labels = client_class_counts(seed, c, config.dataset_size, config.num_label_classes)
        client_labels.append(labels)
        accumulate_class_distribution(class_distribution, labels, salt, hash_registry)

    length = min(config.model_size, MODEL_VECTOR_CAP)
    model = np.zeros(length, dtype=np.float64)
    train_time = _train_duration(config)
    agg_time = _agg_duration(config)
    comm_bytes = 8.0 * config.model_size  # one upload + one download at 4 bytes/parameter
    em = config.energy_model

    training_seconds: dict[int, float] = {c: 0.0 for c in range(n)}

    def client_phase(round_index: int, client: int):
        records = []
        rec = track_phase(
            _RecordSink(records),
            node_id=hash_client_id(salt, client),
            role="client",
            phase="training",
            round_index=round_index,
            model=em,
            hardware=client_hw[client],
            duration_s=train_time,
            intensity=client_intensity[client],
        )
        if em.comm_energy_per_byte > 0.0:
            energy = em.comm_energy_per_byte * comm_bytes
            records.append(
                EmissionRecord(
                    node_id=rec.node_id,
                    role="client",
                    phase="communication",
                    round=round_index,
                    duration_s=0.0,
                    energy_kwh=energy,
                    intensity=client_intensity[client],
                    co2eq_g=energy_to_co2(energy, client_intensity[client]),
                )
            )
        return records

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for t in range(1, config.total_rounds + 1):
            selected = sample_clients(n, m, SelectionStream(seed, t))
            deltas = _round_deltas(seed, t, len(selected), length)
            updates = [model + deltas[i] for i in range(len(selected))]
            if pool is not None:
                results = list(pool.map(lambda c: client_phase(t, c), selected))
            else:
                results = [client_phase(t, c) for c in selected]
            for client, records in zip(selected, results):
                selection_counts[client] += 1
                training_seconds[client] += train_time
                log.extend(records)
            model = aggregate_model(updates)
            if not np.all(np.isfinite(model)):
                raise SimulationError(f"model vector became non-finite in round {t}")
            track_phase(
                log,
                node_id="server",
                role="server",
                phase="aggregation",
                round_index=t,
                model=em,
                hardware=server_hw,
                duration_s=agg_time,
                intensity=server_intensity,
            )
    finally:
        if pool is not None:
            pool.shutdown()

    statistics = {
        c: ClientStatistics(
            participation_rate=selection_counts[c] / config.total_rounds,
            avg_training_time_s=(
                training_seconds[c] / selection_counts[c] if selection_counts[c] else 0.0
            ),
            dataset_size=config.dataset_size,
            class_balance={hash_label(salt, k): v for k, v in sorted(client_labels[c].items())},
        )
        for c in range(n)
    }

    return FederationState(
        round=config.total_rounds,
        model=model,
        selection_counts=selection_counts,
        class_distribution=class_distribution,
        emissions=log,
        client_countries=countries,
        client_hardware=hardware_names,
        statistics=statistics,
    )


class _RecordSink:
    """Adapter so track_phase can append into a per-client list."""

    def __init__(self, records: list):
        self._records = records

    def add(self, record) -> None:
        self._records.append(record)
