"""Batch front end: run campaigns, compare reconstruction models, plot densities.

    fuzzytomo simulate --preset fig3-cube-ideal --out results/
    fuzzytomo simulate --config my_campaign.json --seed 7
    fuzzytomo compare  --preset fig7-model-compare --out results/
    fuzzytomo plot     --out results/

Exit codes: 0 success, 2 configuration/input errors, 3 I/O failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    ExperimentConfig,
    paired_model_comparison,
    run_campaign,
    summarize,
    theory_infidelity_samples,
    write_campaign_csv,
    write_campaign_summary,
    write_histogram_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

_BASE = {
    "dim": 4,
    "n_tot": 10**6,
    "n_exp": 200,
    "seed": 20250,
}

#: one preset per reproduced figure; band = paper center checked at 3 sigma + base slack
PRESETS = {
    "fig2-sweep": {
        "mode": "sweep",
        "sweep_nm": (0.0, 10.0, 20.0, 40.0),
        "config": {**_BASE, "symmetry": "octahedron", "delta_lambda_nm": 0.0,
                   "data_model": "fuzzy", "reconstruction_model": "fuzzy"},
        "full_n_exp": 200,
        "band": None,
    },
    "fig3-cube-ideal": {
        "mode": "simulate",
        "config": {**_BASE, "symmetry": "cube", "delta_lambda_nm": 0.0},
        "full_n_exp": 10**4,
        "band": {"L_center": 3.26674},
    },
    "fig4-oct-ideal": {
        "mode": "simulate",
        "config": {**_BASE, "symmetry": "octahedron", "delta_lambda_nm": 0.0},
        "full_n_exp": 10**4,
        "band": {"L_center": 3.21615},
    },
    "fig5-cube-20nm": {
        "mode": "simulate",
        "config": {**_BASE, "symmetry": "cube", "delta_lambda_nm": 20.0,
                   "data_model": "fuzzy", "reconstruction_model": "fuzzy"},
        "full_n_exp": 10**4,
        "band": {"L_center": 4.4580},
    },
    "fig6-oct-20nm": {
        "mode": "simulate",
        "config": {**_BASE, "symmetry": "octahedron", "delta_lambda_nm": 20.0,
                   "data_model": "fuzzy", "reconstruction_model": "fuzzy"},
        "full_n_exp": 10**4,
        "band": {"L_center": 4.4201},
    },
    "fig7-model-compare": {
        "mode": "compare",
        "config": {**_BASE, "symmetry": "octahedron", "delta_lambda_nm": 20.0,
                   "data_model": "fuzzy", "reconstruction_model": "fuzzy"},
        "full_n_exp": 200,
        "band": {"ratio": (300.0, 1500.0)},
    },
}

#: residual allowance for the calibrated-convention offset from the paper values
BAND_BASE_TOL = 0.02


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _load_config(args) -> tuple[ExperimentConfig, dict | None, str]:
    preset = None
    if args.preset is not None:
        preset = PRESETS.get(args.preset)
        if preset is None:
            names = ", ".join(sorted(PRESETS))
            raise CliError(f"unknown preset {args.preset!r}; valid presets: {names}", EXIT_CONFIG)
        doc = dict(preset["config"])
        if args.full:
            doc["n_exp"] = preset["full_n_exp"]
        name = args.preset
    elif args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError as exc:
            raise CliError(f"config file not found: {args.config}", EXIT_CONFIG) from exc
        except json.JSONDecodeError as exc:
            raise CliError(f"config file is not valid JSON: {exc}", EXIT_CONFIG) from exc
        name = Path(args.config).stem
    else:
        raise CliError("one of --config or --preset is required", EXIT_CONFIG)

    for flag, key in (("seed", "seed"), ("n_exp", "n_exp"), ("n_tot", "n_tot")):
        value = getattr(args, flag)
        if value is not None:
            doc[key] = value
    try:
        config = ExperimentConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid configuration: {exc}", EXIT_CONFIG) from exc
    return config, preset, name


def _outdir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc}", EXIT_IO) from exc
    return out


def _within_band(result, band) -> bool | None:
    if band is None or "L_center" not in band:
        return None
    tol = BAND_BASE_TOL + 3.0 * result.L_stderr
    return bool(abs(result.L - band["L_center"]) <= tol)


def _write(path, writer, *payload):
    try:
        writer(path, *payload)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from exc


def _emit_campaign(outdir: Path, stem: str, result, band=None) -> dict:
    _write(outdir / f"{stem}_runs.csv", write_campaign_csv, result)
    summary = result.summary_dict()
    within = _within_band(result, band)
    if band is not None:
        summary["expected_band"] = band
        if within is not None:
            summary["within_band"] = within
    edges = np.histogram_bin_edges(result.infidelities, bins=60,
                                   range=(0.0, float(np.quantile(result.infidelities, 0.999))))
    dens, _ = np.histogram(result.infidelities, bins=edges, density=True)
    _write(outdir / f"{stem}_hist.csv", write_histogram_csv, edges, dens)
    try:
        with open(outdir / f"{stem}_summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise CliError(f"cannot write summary: {exc}", EXIT_IO) from exc
    return summary


def cmd_simulate(args) -> int:
    config, preset, name = _load_config(args)
    outdir = _outdir(args)
    if preset is not None and preset["mode"] == "sweep":
        return _run_sweep(args, config, preset, name, outdir)
    if preset is not None and preset["mode"] == "compare":
        return cmd_compare(args)
    result = run_campaign(config, jobs=args.jobs)
    summary = _emit_campaign(outdir, name, result, preset["band"] if preset else None)
    print(f"{name}: L = {result.L:.5f} +- {result.L_stderr:.5f}, "
          f"Eff = {result.Eff:.5f} +- {result.Eff_stderr:.5f}")
    if "within_band" in summary and not summary["within_band"]:
        print("warning: result outside the preset's expected band", file=sys.stderr)
    return EXIT_OK


def _run_sweep(args, base_config: ExperimentConfig, preset, name, outdir: Path) -> int:
    results = []
    samples = []
    for dl in preset["sweep_nm"]:
        doc = base_config.to_dict()
        doc["delta_lambda_nm"] = dl
        config = ExperimentConfig.from_dict(doc)
        result = run_campaign(config, jobs=args.jobs)
        stem = f"{name}_{int(dl)}nm"
        _emit_campaign(outdir, stem, result)
        _, pooled = theory_infidelity_samples(config, n_states=min(config.n_exp, 200))
        _write(outdir / f"{stem}_theoryhist.csv", _write_theory_hist, pooled)
        results.append(result)
        samples.append(pooled)
        print(f"{stem}: mean(1-F) = {result.mean_infidelity:.3e}, L = {result.L:.4f}")
    sweep = summarize(results, samples=samples)
    doc = {
        "rows": list(sweep.rows),
        "mean_infidelity_increasing": sweep.mean_infidelity_increasing,
        "mode_height_decreasing": sweep.mode_height_decreasing,
    }
    try:
        with open(outdir / f"{name}_sweep.json", "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise CliError(f"cannot write sweep summary: {exc}", EXIT_IO) from exc
    print(f"mean infidelity increasing: {sweep.mean_infidelity_increasing}; "
          f"mode height decreasing: {sweep.mode_height_decreasing}")
    return EXIT_OK


def _write_theory_hist(path, pooled):
    hi = float(np.quantile(pooled, 0.999))
    dens, edges = np.histogram(pooled, bins=60, range=(0.0, hi), density=True)
    write_histogram_csv(path, edges, dens)


def cmd_compare(args) -> int:
    config, preset, name = _load_config(args)
    outdir = _outdir(args)
    if config.data_model != "fuzzy":
        raise CliError("compare requires a config with data_model = 'fuzzy'", EXIT_CONFIG)
    comparison = paired_model_comparison(config, jobs=args.jobs)
    _emit_campaign(outdir, f"{name}_standard", comparison.standard)
    _emit_campaign(outdir, f"{name}_fuzzy", comparison.fuzzy)
    band = preset["band"] if preset else None
    report = {
        "config": config.to_dict(),
        "L_standard": comparison.standard.L,
        "L_standard_stderr": comparison.standard.L_stderr,
        "L_fuzzy": comparison.fuzzy.L,
        "L_fuzzy_stderr": comparison.fuzzy.L_stderr,
        "loss_ratio": comparison.loss_ratio,
        "paired_counts_identical": comparison.paired,
        "count_digest_first": comparison.count_digests[0],
        "standard_rejected_p01": float(np.mean(comparison.standard.p_values < 0.01)),
        "fuzzy_rejected_p05": float(np.mean(comparison.fuzzy.p_values < 0.05)),
    }
    if band is not None and "ratio" in band:
        lo, hi = band["ratio"]
        report["expected_ratio_band"] = [lo, hi]
        report["within_band"] = bool(lo <= comparison.loss_ratio <= hi)
    try:
        with open(outdir / f"{name}_compare.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise CliError(f"cannot write comparison report: {exc}", EXIT_IO) from exc
    print(f"{name}: L_standard = {comparison.standard.L:.3f}, "
          f"L_fuzzy = {comparison.fuzzy.L:.3f}, ratio = {comparison.loss_ratio:.1f}")
    return EXIT_OK


def _read_runs_csv(path: Path) -> np.ndarray:
    rows = path.read_text(encoding="utf-8").strip().splitlines()
    if len(rows) < 2:
        raise CliError(f"campaign file {path} has no runs", EXIT_CONFIG)
    inf = [float(line.split(",")[2]) for line in rows[1:]]
    return np.array(inf)


def _read_hist_csv(path: Path):
    rows = path.read_text(encoding="utf-8").strip().splitlines()[1:]
    lo = np.array([float(r.split(",")[0]) for r in rows])
    hi = np.array([float(r.split(",")[1]) for r in rows])
    dens = np.array([float(r.split(",")[2]) for r in rows])
    return 0.5 * (lo + hi), dens


def cmd_plot(args) -> int:
    outdir = Path(args.out)
    if not outdir.is_dir():
        raise CliError(f"output directory {outdir} does not exist", EXIT_CONFIG)
    curves = []
    theory = sorted(outdir.glob("*_theoryhist.csv"))
    if theory:
        for path in theory:
            centers, dens = _read_hist_csv(path)
            curves.append((path.stem.replace("_theoryhist", ""), centers, dens))
    else:
        for path in sorted(outdir.glob("*_runs.csv")):
            inf = _read_runs_csv(path)
            hi = float(np.quantile(inf, 0.999)) or float(inf.max() or 1.0)
            dens, edges = np.histogram(inf, bins=60, range=(0.0, hi), density=True)
            centers = 0.5 * (edges[:-1] + edges[1:])
            curves.append((path.stem.replace("_runs", ""), centers, dens))
            _write(path.with_name(path.name.replace("_runs.csv", "_hist.csv")),
                   write_histogram_csv, edges, dens)
    if not curves:
        raise CliError(f"no campaign outputs (*_runs.csv) found in {outdir}", EXIT_CONFIG)
    svg = render_svg(curves, title="Infidelity distribution",
                     xlabel="1 - F", ylabel="density")
    try:
        (outdir / "infidelity_density.svg").write_text(svg, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write SVG: {exc}", EXIT_IO) from exc
    print(f"wrote {outdir / 'infidelity_density.svg'} with {len(curves)} curve(s)")
    return EXIT_OK


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def render_svg(curves, title="", xlabel="", ylabel="",
               width=840, height=520) -> str:
    """Plain polyline overlay of (label, x, y) curves; no rendering dependencies."""
    ml, mr, mt, mb = 70, 170, 40, 55
    pw, ph = width - ml - mr, height - mt - mb
    xmax = max(float(np.max(x)) for _, x, _ in curves) or 1.0
    ymax = max(float(np.max(y)) for _, _, y in curves) or 1.0

    def sx(x):
        return ml + pw * x / xmax

    def sy(y):
        return mt + ph * (1 - y / ymax)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{ml + pw / 2}" y="22" text-anchor="middle" font-size="15">{title}</text>',
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
        f'<text x="{ml + pw / 2}" y="{height - 12}" text-anchor="middle" '
        f'font-size="12">{xlabel}</text>',
        f'<text x="18" y="{mt + ph / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {mt + ph / 2})">{ylabel}</text>',
    ]
    for k in range(5):
        x = xmax * k / 4
        y = ymax * k / 4
        parts.append(f'<line x1="{sx(x):.1f}" y1="{mt + ph}" x2="{sx(x):.1f}" '
                     f'y2="{mt + ph + 4}" stroke="black"/>')
        parts.append(f'<text x="{sx(x):.1f}" y="{mt + ph + 18}" text-anchor="middle" '
                     f'font-size="10">{x:.2e}</text>')
        parts.append(f'<line x1="{ml - 4}" y1="{sy(y):.1f}" x2="{ml}" y2="{sy(y):.1f}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{ml - 8}" y="{sy(y) + 3:.1f}" text-anchor="end" '
                     f'font-size="10">{y:.2e}</text>')
    for i, (label, xs, ys) in enumerate(curves):
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        pts = " ".join(f"{sx(float(x)):.2f},{sy(float(y)):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = mt + 16 + 18 * i
        parts.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 34}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{ml + pw + 40}" y="{ly}" font-size="11">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fuzzytomo", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("simulate", cmd_simulate), ("compare", cmd_compare), ("plot", cmd_plot)):
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON campaign config")
        p.add_argument("--preset", type=str, default=None, help="named figure preset")
        p.add_argument("--out", type=str, default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--full", action="store_true", help="paper-scale n_exp")
        p.add_argument("--n-exp", dest="n_exp", type=int, default=None)
        p.add_argument("--n-tot", dest="n_tot", type=int, default=None)
        p.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
