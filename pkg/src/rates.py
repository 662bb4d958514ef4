"""
Finite-n quantum-communication rates for pdpolar.
Every lim (1/n) quantity is reported as a plain fraction at the configured n.
"""

from dataclasses import dataclass, asdict
from typing import NamedTuple

import numpy as np

from codesets import CodeSetPartition
from logger import get_logger

log = get_logger("rates")


def _count(mask):
    return int(np.count_nonzero(mask))


class HolevoProxies(NamedTuple):
    chi_ab: float
    chi_ae: float
    chi_aeprime: float
    chi_aeprime_p1: float  # P2 terms dropped, as when |P2 \ P2'|/n -> 0


@dataclass(frozen=True)
class RateReport:
    n: int
    rq_degr: float
    rq_pd: float
    chi_ab: float
    chi_ae: float
    chi_aeprime: float
    chi_aeprime_p1: float
    ent_consumption: float
    rate_gap: float
    unpolarized_fraction: float = 0.0

    def to_dict(self):
        return asdict(self)


def rate_degr(partition: CodeSetPartition):
    """Degradable-channel rate |S_in^degr| / n."""
    return partition.m / partition.n


def rate_pd(partition: CodeSetPartition):
    """PD rate |S_in^conj.PD| / n = (m + Delta) / n."""
    return _count(partition.s_in_pd) / partition.n


def holevo_proxies(partition: CodeSetPartition) -> HolevoProxies:
    p = partition
    return HolevoProxies(
        chi_ab=_count(p.g_amp | p.p2_prime) / p.n,
        chi_ae=(_count(p.p1) + _count(p.p2)) / p.n,
        chi_aeprime=(_count(p.p1_frozen) + _count(p.p2_frozen)) / p.n,
        chi_aeprime_p1=_count(p.p1_frozen) / p.n,
    )


def ent_consumption(partition: CodeSetPartition):
    """Entanglement-consumption fraction |B| / n."""
    return _count(partition.b_both) / partition.n


def rate_gap(partition: CodeSetPartition):
    """R_Q(N_AE) - R_Q(N_AE') at finite n: |P1'| / n."""
    return (_count(partition.p1) - _count(partition.p1_frozen)) / partition.n


def build_report(partition: CodeSetPartition, unpolarized=0.0) -> RateReport:
    chi = holevo_proxies(partition)
    report = RateReport(
        n=partition.n,
        rq_degr=rate_degr(partition),
        rq_pd=rate_pd(partition),
        chi_ab=chi.chi_ab,
        chi_ae=chi.chi_ae,
        chi_aeprime=chi.chi_aeprime,
        chi_aeprime_p1=chi.chi_aeprime_p1,
        ent_consumption=ent_consumption(partition),
        rate_gap=rate_gap(partition),
        unpolarized_fraction=float(unpolarized),
    )
    log.debug(f"Rates n={report.n}: degr={report.rq_degr:.6g}, pd={report.rq_pd:.6g}")
    return report


def rate_capacity_identity(report: RateReport, partition: CodeSetPartition):
    """
    Compare R_Q with both lines of the capacity expression:
    chi_AB - chi_AE' and (|G_amp| - |P1 \\ P1'|) / n. Residuals are exact
    integer differences over n.
    """
    p = partition
    n = p.n
    pd_count = _count(p.s_in_pd)

    second_line = _count(p.g_amp) - _count(p.p1_frozen)
    first_line = _count(p.g_amp | p.p2_prime) - _count(p.p1_frozen) - _count(p.p2_frozen)

    forced = not np.any(p.p2_frozen) and not np.any(p.p2_prime)
    residual = abs(second_line - pd_count) / n

    return {
        "rq_pd": report.rq_pd,
        "second_line": second_line / n,
        "residual": residual,
        "first_line": first_line / n,
        "first_line_residual": abs(first_line - pd_count) / n,
        "zero_forced": forced,
        "passed": residual == 0.0 if forced else True,
    }
