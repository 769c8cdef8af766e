"""
Parameter sweeps over the filter setup.

Every cell simulates its scenario from the run seed and identifies it
with one setting, so cells are independent and may run in worker
processes. Rows are collected once all cells finish and sorted by cell
key, so evaluation order never shows in the table.
"""

import concurrent.futures
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from tmdid.core.config import RunConfig
from tmdid.core.csvio import write_table
from tmdid.core.models import FilterDivergenceError
from tmdid.dynamics.discretization import Order, check_order
from tmdid.harness.metrics import stiffness_deviation
from tmdid.harness.runner import identify_scenario, simulate_scenario

logger = logging.getLogger(__name__)

SWEEP_HEADER = [
    "variant",
    "p0",
    "q",
    "order",
    "story",
    "initial_stiffness",
    "final_stiffness",
    "true_stiffness",
    "deviation",
    "detections",
    "status",
]
SWEEP_UNITS = ["", "", "", "", "", "N/m", "N/m", "N/m", "%", "", ""]


@dataclass(frozen=True)
class SweepCell:
    """One point of a sweep grid."""

    variant: str
    p0: float
    q: float
    order: Order

    @property
    def key(self) -> tuple:
        # "1" < "4" < "exact"
        return (self.variant, self.p0, -self.q, str(self.order))


def run_cell(config: RunConfig, cell: SweepCell) -> list[tuple[Any, ...]]:
    """
    Simulate and identify one cell; a diverging filter gives status rows.

    Returns:
        One row per identified story, in SWEEP_HEADER order
    """
    cell_config = config.copy()
    cell_config.filter.p0 = cell.p0
    cell_config.filter.q = cell.q
    cell_config.filter.p0_param = None
    cell_config.filter.q_param = None
    cell_config.filter.taylor_order = cell.order

    scenario = simulate_scenario(cell_config, cell.variant)
    true_final = scenario.true_stiffness[-1]
    stories = cell_config.filter.identified or list(range(scenario.structure.n_stories))
    head = (cell.variant, cell.p0, cell.q, cell.order)
    try:
        result, metrics = identify_scenario(cell_config, scenario)
    except FilterDivergenceError as e:
        logger.warning(f"cell {head} diverged: {e}")
        return [
            head + (s + 1, None, None, float(true_final[s]), None, None, "diverged")
            for s in stories
        ]

    rows = []
    for i, story in enumerate(result.identified):
        final = float(result.final_stiffness[i])
        true = float(true_final[story])
        rows.append(
            head
            + (
                story + 1,
                float(result.stiffness[0][i]),
                final,
                true,
                stiffness_deviation(true, final),
                len(result.log),
                "ok",
            )
        )
    logger.info(
        f"cell {head}: deviations "
        f"{[round(d, 5) for d in metrics.deviations.values()]} %"
    )
    return rows


def _run_cells(
    config: RunConfig, cells: list[SweepCell], workers: int
) -> list[tuple[Any, ...]]:
    results: dict[SweepCell, list[tuple[Any, ...]]] = {}
    if workers <= 1 or len(cells) <= 1:
        for cell in cells:
            results[cell] = run_cell(config, cell)
    else:
        max_workers = min(workers, len(cells))
        with concurrent.futures.ProcessPoolExecutor(max_workers=max_workers) as pool:
            future_map = {pool.submit(run_cell, config, cell): cell for cell in cells}
            for future in concurrent.futures.as_completed(future_map):
                results[future_map[future]] = future.result()

    rows = []
    for cell in sorted(results, key=lambda c: c.key):
        rows.extend(results[cell])
    return rows


def _variants(config: RunConfig) -> list[str]:
    variants = list(dict.fromkeys(config.sweep.variants))
    if "tmd" in variants and config.structure.tmd is None:
        logger.warning("structure has no TMD, sweeping the bare variant only")
        variants = [v for v in variants if v != "tmd"] or ["bare"]
    return variants


def sweep_covariance(
    config: RunConfig, p0_grid: Optional[list[float]] = None
) -> list[tuple[Any, ...]]:
    """
    One identification per initial covariance scalar and variant.

    P0 = p0 * I; the stiffness block is in stiffness_unit^2.
    """
    grid = config.sweep.p0 if p0_grid is None else p0_grid
    order = check_order(config.filter.taylor_order)
    cells = [
        SweepCell(variant, float(p0), config.filter.q, order)
        for variant in _variants(config)
        for p0 in dict.fromkeys(grid)
    ]
    logger.info(f"covariance sweep: {len(cells)} cell(s), {config.workers} worker(s)")
    return _run_cells(config, cells, config.workers)


def sweep_model(
    config: RunConfig,
    q_grid: Optional[list[float]] = None,
    orders: Optional[list[Order]] = None,
) -> list[tuple[Any, ...]]:
    """
    One identification per process-noise scalar, order and variant.

    Orders are Taylor orders 1-4 or "exact".

    Raises:
        ValidationError: On an unknown order
    """
    q_values = config.sweep.q if q_grid is None else q_grid
    order_values = config.sweep.orders if orders is None else orders
    order_values = [check_order(o) for o in order_values]
    cells = [
        SweepCell(variant, config.filter.p0, float(q), order)
        for variant in _variants(config)
        for q in dict.fromkeys(q_values)
        for order in dict.fromkeys(order_values)
    ]
    logger.info(f"model sweep: {len(cells)} cell(s), {config.workers} worker(s)")
    return _run_cells(config, cells, config.workers)


def write_sweep(
    path: Path, rows: list[tuple[Any, ...]], config: RunConfig, kind: str
) -> Path:
    """Write a sweep table with the run manifest."""
    return write_table(
        path,
        SWEEP_HEADER,
        rows,
        units=SWEEP_UNITS,
        manifest={
            "config_sha256": config.config_hash(),
            "seed": config.seed,
            "sweep": kind,
            "stories": len(config.structure.masses),
        },
    )
