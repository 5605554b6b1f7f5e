from __future__ import annotations

import logging

from cdlgen.models import CostBenefitReport

logger = logging.getLogger(__name__)


def cost_benefit(baseline_hours: float, assisted_hours: float, rate: float, n_modules: int = 1) -> CostBenefitReport:
    """Labor savings of the assisted workflow, per module and over ``n_modules``."""
    if baseline_hours <= 0:
        msg = f"baseline hours must be positive, got {baseline_hours}"
        raise ValueError(msg)
    if assisted_hours < 0 or rate < 0:
        msg = "assisted hours and rate must not be negative"
        raise ValueError(msg)
    if n_modules < 1:
        msg = f"n_modules must be at least 1, got {n_modules}"
        raise ValueError(msg)
    saved = baseline_hours - assisted_hours
    savings = saved * rate
    return CostBenefitReport(
        baseline_hours=baseline_hours,
        assisted_hours=assisted_hours,
        rate=rate,
        n_modules=n_modules,
        savings_per_module=savings,
        savings_percent=saved * 100 / baseline_hours,
        portfolio_savings=savings * n_modules,
    )


def cost_benefit_range(
    baseline_range: tuple[float, float],
    assisted_range: tuple[float, float],
    rate: float,
    module_range: tuple[int, int],
) -> tuple[CostBenefitReport, CostBenefitReport]:
    """Pessimistic and optimistic corners: least saved over fewest modules, most saved over most."""
    low = cost_benefit(min(baseline_range), max(assisted_range), rate, min(module_range))
    high = cost_benefit(max(baseline_range), min(assisted_range), rate, max(module_range))
    logger.debug("Portfolio savings %.0f to %.0f", low.portfolio_savings, high.portfolio_savings)
    return low, high


def format_cost(report: CostBenefitReport) -> str:
    return (
        f"baseline {report.baseline_hours:g} h, assisted {report.assisted_hours:g} h, rate {report.rate:g}/h\n"
        f"savings per module {report.savings_per_module:,.0f} ({report.savings_percent:.0f}%)\n"
        f"portfolio of {report.n_modules} modules {report.portfolio_savings:,.0f}\n"
    )
