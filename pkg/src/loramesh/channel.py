"""Propagation model and reception arbitration.

Underground galleries attenuate hard and shadow little, so links follow a
log-distance law with a configurable exponent and (by default) no
shadowing term. Reachability is topology driven: node pairs without an
explicit link never exchange energy, whatever the nominal range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Reception outcomes.
RX_OK = 0
RX_COLLIDED = 1
RX_BELOW_SENSITIVITY = 2

DEFAULT_SENSITIVITY_DBM = -116.0
DEFAULT_CAPTURE_DB = 6.0


@dataclass(frozen=True)
class PathLossModel:
    """Log-distance path loss: L(d) = L0 + 10*gamma*log10(d/d0) + X.

    ``ref_loss_db`` is the mean loss at the reference distance ``d0`` and
    ``exponent`` the environment exponent gamma. ``shadowing_sigma_db``
    is the standard deviation of the optional log-normal term X; zero
    keeps the channel deterministic.
    """

    ref_distance_m: float = 1.0
    ref_loss_db: float = 40.0
    exponent: float = 2.5
    shadowing_sigma_db: float = 0.0

    def __post_init__(self) -> None:
        if self.ref_distance_m <= 0:
            raise ValueError("reference distance must be positive")
        if self.exponent <= 0:
            raise ValueError("path loss exponent must be positive")
        if self.shadowing_sigma_db < 0:
            raise ValueError("shadowing sigma cannot be negative")


def path_loss(model: PathLossModel, distance_m: float, shadow_db: float = 0.0) -> float:
    """Mean path loss in dB at ``distance_m`` plus a sampled shadow term.

    Distances inside the reference distance are clamped to it; the law
    is not calibrated below d0, so closer nodes just see the floor loss.
    """
    if distance_m < model.ref_distance_m:
        distance_m = model.ref_distance_m
    return (
        model.ref_loss_db
        + 10.0 * model.exponent * math.log10(distance_m / model.ref_distance_m)
        + shadow_db
    )


def received_power(
    tx_power_dbm: float,
    model: PathLossModel,
    distance_m: float,
    shadow_db: float = 0.0,
) -> float:
    """Received signal strength in dBm over one link."""
    return tx_power_dbm - path_loss(model, distance_m, shadow_db)


class LinkModel:
    """Pairwise reachability and signal strength for one deployment.

    Links are undirected and explicit: ``distance(a, b)`` is ``None`` for
    any pair the deployment file does not connect, and such pairs are
    unconditionally out of range for carrier sensing, reception, and
    interference alike.
    """

    def __init__(
        self,
        path_loss_model: PathLossModel | None = None,
        sensitivity_dbm: float = DEFAULT_SENSITIVITY_DBM,
        capture_threshold_db: float = DEFAULT_CAPTURE_DB,
    ) -> None:
        self.path_loss_model = path_loss_model or PathLossModel()
        self.sensitivity_dbm = sensitivity_dbm
        self.capture_threshold_db = capture_threshold_db
        self._distance: dict[tuple[int, int], float] = {}
        self._neighbors: dict[int, list[int]] = {}

    @staticmethod
    def _key(a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def add_link(self, a: int, b: int, distance_m: float) -> None:
        if a == b:
            raise ValueError(f"node {a} cannot link to itself")
        if distance_m <= 0:
            raise ValueError(f"link {a}-{b} needs a positive distance")
        key = self._key(a, b)
        if key in self._distance:
            raise ValueError(f"duplicate link {a}-{b}")
        self._distance[key] = distance_m
        self._neighbors.setdefault(a, []).append(b)
        self._neighbors.setdefault(b, []).append(a)

    def distance(self, a: int, b: int) -> float | None:
        return self._distance.get(self._key(a, b))

    def neighbors(self, uid: int) -> list[int]:
        return sorted(self._neighbors.get(uid, ()))

    def link_items(self) -> list[tuple[int, int, float]]:
        return sorted((a, b, d) for (a, b), d in self._distance.items())

    def rx_power(self, tx_uid: int, rx_uid: int, tx_power_dbm: float, shadow_db: float = 0.0) -> float | None:
        """Received power for one directed transmission, None if unlinked."""
        d = self.distance(tx_uid, rx_uid)
        if d is None:
            return None
        return received_power(tx_power_dbm, self.path_loss_model, d, shadow_db)


def reception_outcome(
    prx_dbm: float,
    strongest_interferer_dbm: float | None,
    sensitivity_dbm: float,
    capture_threshold_db: float,
) -> int:
    """Outcome for one transmission given its worst concurrent rival.

    A frame below the sensitivity floor is undetectable. Otherwise it
    survives interference only when it clears the strongest overlapping
    rival by the capture margin for its whole airtime; the caller passes
    the strongest rival seen across that window.
    """
    if prx_dbm < sensitivity_dbm:
        return RX_BELOW_SENSITIVITY
    if strongest_interferer_dbm is None:
        return RX_OK
    if prx_dbm - strongest_interferer_dbm >= capture_threshold_db:
        return RX_OK
    return RX_COLLIDED


def resolve_reception(
    arrivals: list[tuple[object, float]],
    sensitivity_dbm: float = DEFAULT_SENSITIVITY_DBM,
    capture_threshold_db: float = DEFAULT_CAPTURE_DB,
) -> dict[object, int]:
    """Arbitrate a set of fully overlapping arrivals at one receiver.

    ``arrivals`` holds (key, received power) pairs. Sub-sensitivity
    arrivals are flagged and excluded from interference; among the rest,
    at most the strongest survives, and only with the capture margin in
    hand. Everything else is lost to the collision.
    """
    out: dict[object, int] = {}
    audible: list[tuple[object, float]] = []
    for key, prx in arrivals:
        if prx < sensitivity_dbm:
            out[key] = RX_BELOW_SENSITIVITY
        else:
            audible.append((key, prx))
    if not audible:
        return out
    if len(audible) == 1:
        key, _ = audible[0]
        out[key] = RX_OK
        return out
    ranked = sorted(audible, key=lambda item: item[1], reverse=True)
    strongest_key, strongest = ranked[0]
    runner_up = ranked[1][1]
    for key, _ in ranked:
        out[key] = RX_COLLIDED
    if strongest - runner_up >= capture_threshold_db:
        out[strongest_key] = RX_OK
    return out
