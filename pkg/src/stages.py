import os
import json
import logging
import pandas as pd
from tqdm.auto import tqdm
from typing import Any, Dict, List, Optional

from oracle.constants import EIGENVALUE_COLUMNS
from oracle.grid import build_grid
from oracle.solver import SpectrumResult, solve_grid
from spectral.bounds import BoundParams, bound_transverse_sum, evaluate_bound, integrand_profile
from spectral.conditions import (
    asymptotic_diagnostics,
    no_discrete_spectrum_certificate,
    tail_integrability,
)
from spectral.potential import effective_potential_table
from spiral.families import make_perturbation
from spiral.geometry import SpiralSpec, radial_profile
from spiral.window import GeometryWindow, find_s0
from utils.constants import TWO_PI
from utils.data_loaders import (
    RunConfig,
    validate_report,
    write_flat_binary,
    write_report,
    write_table,
)
from utils.exceptions import CertificateError, SpiralError


def make_spec(config: RunConfig) -> SpiralSpec:
    spiral = config.spiral
    return SpiralSpec(a0=spiral.a0, rho=make_perturbation(spiral.family, **spiral.params))


def bound_params(config: RunConfig, sigma: float) -> BoundParams:
    bound = config.bound
    return BoundParams(
        sigma=sigma,
        threshold=bound.threshold,
        r_factor=bound.r_factor if sigma < 1.5 else None,
        quad_rel_tol=bound.quad_rel_tol,
        tail_cut=bound.tail_cut,
    )


class RunState:
    """
    Artifacts shared between the stages of one invocation; later stages
    build what an earlier stage would have produced when it was not run
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.hash = config.hash
        self.fdir = config.outputs.directory
        self._window = None
        self._bounds = None

    @property
    def window(self) -> GeometryWindow:
        if self._window is None:
            geometry = self.config.geometry
            self._window = find_s0(
                make_spec(self.config),
                horizon=geometry.horizon,
                margin=geometry.margin,
                ratio=geometry.ratio,
                root_tol=geometry.root_tol,
                quad_rel_tol=geometry.quad_rel_tol,
            )
        return self._window

    @property
    def bounds(self) -> pd.DataFrame:
        if self._bounds is None:
            rows = []
            for sigma in tqdm(self.config.bound.sigmas, desc="bounds", leave=False):
                params = bound_params(self.config, sigma)
                row = evaluate_bound(self.window, params).to_row()
                row["transverse_total"] = bound_transverse_sum(self.window, params).total
                rows.append(row)
            self._bounds = pd.DataFrame(rows)
        return self._bounds

    def wants(self, fmt: str) -> bool:
        return fmt in self.config.outputs.formats

    def table(self, table: pd.DataFrame, name: str) -> Optional[str]:
        if not self.wants("csv"):
            return None
        return write_table(table, self.fdir, name, self.hash)

    def report(self, report: Dict[str, Any], name: str) -> Optional[str]:
        if not self.wants("json"):
            return None
        return write_report(report, self.fdir, name, self.hash)


def run_geometry(state: RunState) -> bool:
    window = state.window
    table = window.samples.copy()
    table["w_eff"] = effective_potential_table(window)
    state.table(table, "geometry")
    logging.info(f"geometry: s0={window.s0:.10g} (theta0={window.theta0:.6g}), {len(table)} rows")
    return True


def run_bounds(state: RunState) -> bool:
    table = state.bounds
    state.table(table, "bounds")
    state.report({"rows": json.loads(table.to_json(orient="records"))}, "bounds")
    for row in table.itertuples():
        logging.info(
            f"bounds: sigma={row.sigma:g} {row.variant} total={row.total:.10g} "
            f"(integral {row.integral_term:.6g}, omega2 {row.omega2_term:.6g}, "
            f"transverse sum {row.transverse_total:.10g})"
        )
    return True


def run_certify(state: RunState) -> bool:
    window = state.window
    report: Dict[str, Any] = {
        "family": window.spec.family,
        "certificate": no_discrete_spectrum_certificate(
            window, tie_tolerance=state.config.bound.tie_tolerance
        ).to_dict(),
    }
    tails: List[Dict[str, Any]] = []
    for sigma in state.config.bound.sigmas:
        try:
            finite, estimate = tail_integrability(window, sigma, rel_tol=state.config.bound.quad_rel_tol)
            tails.append({"sigma": sigma, "finite": finite, "tail_estimate": estimate})
        except CertificateError as error:
            logging.warning(f"certify: sigma={sigma:g} {error}")
            tails.append({"sigma": sigma, "finite": None, "undetermined": str(error)})
    report["tail_integrability"] = tails

    if window.spec.rho.archimedean_beyond is not None:
        diagnostics = asymptotic_diagnostics(window)
        state.table(diagnostics, "diagnostics")
    else:
        logging.info(f"certify: no asymptotic diagnostics for family {window.spec.family!r}")
    state.report(report, "certificate")
    logging.info(f"certify: verdict {report['certificate']['verdict']}")
    return True


def _eigenvalue_table(result: SpectrumResult) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "index": range(1, len(result.eigenvalues) + 1),
            "eigenvalue": result.eigenvalues,
            "residual": result.residuals,
            "absolute_residual": result.absolute_residuals,
            "below_threshold": result.below_threshold(),
        },
        columns=EIGENVALUE_COLUMNS,
    )


def run_verify(state: RunState) -> bool:
    """
    Moment sums of the grid Dirichlet Laplacian against the bound totals

    Dirichlet eigenvalues of the truncated domain lie above those of the
    full one, so moment <= total is the inequality checked per sigma.
    """
    config = state.config
    window = state.window
    oracle = config.oracle
    bounds = state.bounds
    threshold = float(bounds["threshold"].iloc[0])

    profiles = []
    for sigma in config.bound.sigmas:
        profile = integrand_profile(window, bound_params(config, sigma))
        profile.insert(0, "sigma", sigma)
        profiles.append(profile)
    state.table(pd.concat(profiles, ignore_index=True), "integrand")

    R = oracle.R if oracle.R is not None else radial_profile(window.spec, TWO_PI * oracle.coils)[0]
    grid = build_grid(window.spec, oracle.h, R)
    if oracle.dump or state.wants("binary"):
        write_flat_binary(grid.status, state.fdir, "mask", {"h": grid.h, "R": grid.R}, state.hash)
    result = solve_grid(
        grid, threshold, config.bound.sigmas, k=oracle.k, tol=oracle.tol,
        seed=oracle.seed, method=oracle.method,
    )
    state.table(_eigenvalue_table(result), "eigenvalues")
    if oracle.dump or state.wants("binary"):
        write_flat_binary(
            result.vectors, state.fdir, "eigenvectors",
            {"h": grid.h, "R": grid.R, "eigenvalues": [float(v) for v in result.eigenvalues]},
            state.hash,
        )

    rows = []
    for row in bounds.itertuples():
        moment = result.moments[float(row.sigma)]
        rows.append({
            "sigma": float(row.sigma),
            "moment": moment,
            "bound_total": float(row.total),
            "holds": bool(moment <= row.total),
        })
    report = validate_report({
        "config_hash": state.hash,
        "family": window.spec.family,
        "threshold": threshold,
        "eigenvalues": [float(v) for v in result.eigenvalues],
        "rows": rows,
        "all_hold": all(row["holds"] for row in rows),
        "h": grid.h,
        "R": grid.R,
        "n_interior": grid.n_interior,
        "max_residual": float(result.residuals.max()),
        "max_absolute_residual": float(result.absolute_residuals.max()),
    })
    state.report(report, "verify")
    for row in rows:
        logging.info(
            f"verify: sigma={row['sigma']:g} moment={row['moment']:.10g} "
            f"<= {row['bound_total']:.10g}: {row['holds']}"
        )
    if not report["all_hold"]:
        logging.warning("verify: bound violated")
    return report["all_hold"]


STAGE2RUNNER = {
    "geometry": run_geometry,
    "bounds": run_bounds,
    "certify": run_certify,
    "verify": run_verify,
}
STAGES = {
    **{name: [name] for name in STAGE2RUNNER},
    "all": list(STAGE2RUNNER),
}


def run_stages(config: RunConfig, stage: str) -> bool:
    state = RunState(config)
    os.makedirs(state.fdir, exist_ok=True)
    write_report(config.to_dict(), state.fdir, "config", state.hash)
    ok = True
    for name in STAGES[stage]:
        logging.info(f"stage {name}, config {state.hash}")
        try:
            ok = STAGE2RUNNER[name](state) and ok
        except SpiralError as error:
            error.stage = name
            raise
    return ok
