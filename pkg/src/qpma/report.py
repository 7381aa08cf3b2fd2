"""Deterministic text renderings of protocol results."""

from __future__ import annotations

from .protocol import AggregationReport, SummationResult
from .states import BYZANTINE


def _state_name(label: int | None) -> str:
    return "non-fourier" if label is None else f"phi_{label}"


def format_report(report: AggregationReport) -> str:
    lines = [
        "# qpma aggregation report v1",
        f"parties = {report.N}",
        f"elements = {report.K}",
        f"modulus = {report.P}",
        f"leader = {report.leader}",
        f"leader_encodes = {str(report.leader_encodes).lower()}",
        "outcome_semantics = "
        + ("sum over all parties mod P" if report.leader_encodes else "sum over non-leader parties mod P"),
    ]
    if report.byzantine is not None:
        b = report.byzantine
        lines.append(f"byzantine = party {b.party} mode {b.mode.value} blocks {list(b.blocks)}")
    lines.append("decoded_state = " + " (x) ".join(_state_name(x) for x in report.decoded_labels))
    for e in report.per_element:
        outcome = BYZANTINE if e.outcome == BYZANTINE else str(e.outcome)
        refined = "-" if e.refined_count is None else str(e.refined_count)
        lines.append(f"element {e.label}: outcome={outcome} probability={e.probability:.12f} count={refined}")
    for label, count in report.leader_refined:
        lines.append(f"leader_refined {label} = {count}")
    lines += [
        f"transmitted_qudits = {report.transmitted_qudits}",
        f"download_cost_bits = {report.download_cost_bits!r}",
        f"per_element_cost_bits = {report.per_element_cost_bits!r}",
        f"transcript_digest = {report.transcript_digest}",
    ]
    return "\n".join(lines) + "\n"


def format_summation(result: SummationResult) -> str:
    lines = ["# qpma summation report v1", f"modulus = {result.P}"]
    for l, (s, p) in enumerate(zip(result.sums, result.probabilities)):
        lines.append(f"block {l}: sum={s} probability={p:.12f}")
    lines.append(f"transcript_digest = {result.transcript_digest}")
    return "\n".join(lines) + "\n"
