"""Batch command line interface.

Every command reads a JSON config, writes its outputs into an output
directory and drops a ``manifest.json`` recording the config digest,
package and library versions and the effective seed, so a rerun with the
same inputs is byte-identical (no timestamps anywhere).

Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 file-format
error, 5 incomplete result grid.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from multiprocessing import get_context

import numpy as np

from . import __version__, presets
from .dataset import (STEP_EVERY, STOP_THRESHOLD, assemble_dataset,
                      read_dataset, sample_full_frames, sweep_velocities,
                      write_dataset, write_dlf)
from .dynamics import simulate
from .errors import ConfigError, DitchkitError
from .evaluation import (aggregate_seeds, peak_time_map, rmse_series,
                         total_average_error, winner_table, write_series_csv,
                         write_totals_csv, write_winners_csv)
from .geometry import AeroConfig, HullMesh, Scenario, build_fuselage_mesh
from .rng import Rng
from .rom import (dmd_fit, dmd_predict, multi_trajectory_pairs, pod_fit,
                  pod_reconstruct, save_drom, trajectory_pairs)
from .surrogates import (ARCHITECTURES, ModelArch, TrainConfig, build_model,
                         count_parameters, kae_latent_rollout, load_model,
                         normalized_cases, rollout, save_model, train)
from .svgplot import heatmap_svg, line_svg

_MESH_PRESETS = {
    "d150": presets.d150_mesh,
    "d150_desk": presets.d150_desk_mesh,
    "tn2929": presets.tn2929_mesh,
    "plate": presets.curved_plate_mesh,
}
_SCEN_PRESETS = {
    "d150": presets.d150_scenario,
    "d150_desk": presets.d150_desk_scenario,
}


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _effective_seed(cfg: dict) -> int:
    env = os.environ.get("DITCHKIT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"DITCHKIT_SEED={env!r} is not an integer") \
                from exc
    return int(cfg.get("seed", 1))


def _write_manifest(out_dir, cfg: dict, seed: int, command: str,
                    extra: dict | None = None) -> None:
    digest = hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode()).hexdigest()
    manifest = {"command": command, "config_sha256": digest, "seed": seed,
                "versions": {"ditchkit": __version__,
                             "numpy": np.__version__,
                             "python": sys.version.split()[0]}}
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _build_mesh(cfg: dict) -> HullMesh:
    hull = cfg.get("hull", {"preset": "d150"})
    if "preset" in hull:
        name = hull["preset"]
        if name not in _MESH_PRESETS:
            raise ConfigError(f"unknown hull preset {name!r}; have "
                              f"{sorted(_MESH_PRESETS)}")
        kwargs = {k: hull[k] for k in ("n_frames", "n_arc") if k in hull}
        return _MESH_PRESETS[name](**kwargs)
    if "profile" in hull:
        prof = {k: np.asarray(v, dtype=np.float64)
                for k, v in hull["profile"].items() if k != "length"}
        return build_fuselage_mesh(prof, hull.get("n_frames", 150),
                                   hull.get("n_arc", 171))
    raise ConfigError("hull config needs 'preset' or 'profile'")


def _scenario_kwargs(sc: dict) -> dict:
    """Map config keys (with units in the names) to Scenario fields."""
    key_map = {"u0_mps": "u0", "w0_mps": "w0", "pitch0_deg": "pitch0_deg",
               "mass_kg": "mass", "inertia_yy_kgm2": "inertia_yy",
               "dt_s": "dt", "t_end_s": "t_end", "k_factor": "k_factor",
               "guided": "guided", "start_clearance_m": "start_clearance",
               "rho_water_kgm3": "rho_water", "g_mps2": "g",
               "p_cap_pa": "p_cap", "field_stride": "field_stride"}
    out = {}
    for k, v in sc.items():
        if k in key_map:
            out[key_map[k]] = v
        elif k == "cog_m":
            out["cog"] = tuple(v)
        elif k == "aero":
            if v is not None:
                out["aero"] = AeroConfig(
                    cl_slope=v.get("cl_slope", 0.0),
                    theta_trim_deg=v.get("theta_trim_deg", 0.0),
                    moment_arm=v.get("moment_arm_m", 0.0))
        elif k == "preset":
            pass
        else:
            raise ConfigError(f"unknown scenario key {k!r}")
    return out


def _build_scenario(cfg: dict, u0=None, w0=None, pitch=None) -> Scenario:
    sc = dict(cfg.get("scenario", {}))
    preset = sc.get("preset") or cfg.get("hull", {}).get("preset")
    kwargs = _scenario_kwargs(sc)
    if u0 is not None:
        kwargs["u0"] = u0
    if w0 is not None:
        kwargs["w0"] = w0
    if pitch is not None:
        kwargs["pitch0_deg"] = pitch
    if preset in _SCEN_PRESETS:
        u = kwargs.pop("u0", None)
        w = kwargs.pop("w0", None)
        p = kwargs.pop("pitch0_deg", 6.0)
        if u is None or w is None:
            raise ConfigError("scenario needs u0_mps and w0_mps")
        return _SCEN_PRESETS[preset](u, w, p, **kwargs)
    if preset == "tn2929":
        return presets.tn2929_scenario(**kwargs)
    if preset == "plate":
        return presets.curved_plate_scenario(**kwargs)
    for need in ("u0", "w0", "mass", "cog", "inertia_yy"):
        if need not in kwargs:
            raise ConfigError(f"scenario config is missing {need}")
    return Scenario(**kwargs)


def _write_motion_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "x_m", "z_m", "theta_rad", "u_mps", "w_mps",
                    "q_radps", "fx_n", "fz_n", "my_nm"])
        for i in range(len(history.t)):
            row = ([history.t[i]] + list(history.states[i][1:])
                   + list(history.forces[i]))
            w.writerow([f"{v:.9g}" for v in row])


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    seed = _effective_seed(cfg)
    out = args.output or cfg.get("output_dir", "out_simulate")
    os.makedirs(out, exist_ok=True)
    mesh = _build_mesh(cfg)
    scen = _build_scenario(cfg)
    history = simulate(mesh, scen)
    _write_motion_csv(os.path.join(out, "motion.csv"), history)
    np.savez_compressed(
        os.path.join(out, "fields.npz"), t=history.t,
        pressures=history.pressures, field_steps=history.field_steps,
        fz=history.fz, impact_step=history.impact_step, x=mesh.x)
    peak = peak_time_map(history.pressures.astype(np.float64))
    heatmap_svg(peak, os.path.join(out, "peak_time_map.svg"),
                title="peak arrival (stored-field index, -1 = dry)")
    _write_manifest(out, cfg, seed, "simulate",
                    {"impact_step": int(history.impact_step),
                     "n_steps": int(len(history.t) - 1)})
    print(f"simulate: {len(history.t) - 1} steps, impact at step "
          f"{history.impact_step}, outputs in {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    seed = _effective_seed(cfg)
    out = args.output or cfg.get("output_dir", "out_sweep")
    os.makedirs(out, exist_ok=True)
    sw = cfg.get("sweep")
    if not sw:
        raise ConfigError("sweep config block is required")
    pairs = sweep_velocities(tuple(sw["u0_range_mps"]),
                             tuple(sw["w0_range_mps"]),
                             tuple(sw["counts"]), seed,
                             pitch_deg=sw.get("pitch0_deg", 6.0))
    with open(os.path.join(out, "cases.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["split", "case", "u0_mps", "w0_mps", "pitch0_deg"])
        for name in ("train", "val", "test"):
            for i, (u0, w0, p) in enumerate(pairs[name]):
                w.writerow([name, i, f"{u0:.9g}", f"{w0:.9g}", f"{p:.9g}"])
    _write_manifest(out, cfg, seed, "sweep",
                    {"counts": {k: len(v) for k, v in pairs.items()}})
    print(f"sweep: {sum(len(v) for v in pairs.values())} cases in {out}")
    return 0


_WORKER_CTX = {}


def _init_case_worker(cfg):
    _WORKER_CTX["cfg"] = cfg
    _WORKER_CTX["mesh"] = _build_mesh(cfg)


def _run_case(job):
    name, idx, (u0, w0, pitch) = job
    cfg = _WORKER_CTX["cfg"]
    scen = _build_scenario(cfg, u0, w0, pitch)
    history = simulate(_WORKER_CTX["mesh"], scen)
    ds_cfg = cfg.get("dataset", {})
    full = sample_full_frames(
        history, ds_cfg.get("step_every", STEP_EVERY),
        ds_cfg.get("stop_threshold_pa", STOP_THRESHOLD))
    return name, idx, (u0, w0, pitch), full


def cmd_dataset(args) -> int:
    cfg = _load_config(args.config)
    seed = _effective_seed(cfg)
    out = args.output or cfg.get("output_dir", "out_dataset")
    os.makedirs(out, exist_ok=True)
    sw = cfg.get("sweep")
    if not sw:
        raise ConfigError("sweep config block is required")
    ds_cfg = cfg.get("dataset", {})
    patch = tuple(ds_cfg.get("patch", [128, 128]))
    pairs = sweep_velocities(tuple(sw["u0_range_mps"]),
                             tuple(sw["w0_range_mps"]),
                             tuple(sw["counts"]), seed,
                             pitch_deg=sw.get("pitch0_deg", 6.0))
    jobs = [(name, i, trip) for name in ("train", "val", "test")
            for i, trip in enumerate(pairs[name])]
    n_jobs = args.jobs or int(cfg.get("jobs", 1))
    if n_jobs > 1:
        with get_context("spawn").Pool(n_jobs, _init_case_worker,
                                       (cfg,)) as pool:
            rows = pool.map(_run_case, jobs)
    else:
        _init_case_worker(cfg)
        rows = [_run_case(j) for j in jobs]
    sampled = {name: [] for name in ("train", "val", "test")}
    for name, idx, trip, full in sorted(rows, key=lambda r: (r[0], r[1])):
        sampled[name].append((trip, full))
    ds = assemble_dataset(sampled, patch,
                          step_every=ds_cfg.get("step_every", STEP_EVERY),
                          stop_threshold=ds_cfg.get("stop_threshold_pa",
                                                    STOP_THRESHOLD),
                          blur=ds_cfg.get("blur", True))
    write_dataset(ds, out)
    _write_manifest(out, cfg, seed, "dataset",
                    {"origin": ds.meta["origin"], "patch": list(patch),
                     "x_min": ds.x_min, "x_max": ds.x_max,
                     "cases": {k: len(ds.split(k))
                               for k in ("train", "val", "test")}})
    print(f"dataset: origin {tuple(ds.meta['origin'])}, "
          f"range [{ds.x_min:.1f}, {ds.x_max:.1f}] Pa, outputs in {out}")
    return 0


def _arch_from_cfg(cfg: dict, variant: str) -> ModelArch:
    a = cfg.get("arch_params", {})
    return ModelArch(variant, patch=a.get("patch", 128),
                     window=a.get("window", 3),
                     latent=a.get("latent", 10),
                     filters=tuple(a.get("filters", (8, 16, 32, 64))),
                     lstm_units=a.get("lstm_units", 100))


def cmd_train(args) -> int:
    cfg = _load_config(args.config) if args.config else {}
    variant = args.arch or cfg.get("arch", "cjm")
    if variant not in ARCHITECTURES:
        raise ConfigError(f"unknown architecture {variant!r}")
    arch = _arch_from_cfg(cfg, variant)
    if args.count_params_only:
        print(count_parameters(arch))
        return 0
    if not args.config:
        raise ConfigError("train needs a config (or --count-params-only)")
    seed = args.seed if args.seed is not None else _effective_seed(cfg)
    out = args.output or cfg.get("output_dir", "out_train")
    os.makedirs(out, exist_ok=True)
    ds = read_dataset(cfg["dataset_dir"])
    tr = cfg.get("train", {})
    tcfg = TrainConfig(epochs=tr.get("epochs", 500),
                       batch_size=tr.get("batch_size", 128),
                       lr=tr.get("lr", 1e-3), seed=seed,
                       alpha_linear=tr.get("alpha_linear", 0.01),
                       warmup_epochs=tr.get("warmup_epochs", 25))
    model = build_model(arch, seed=seed)
    result = train(model, ds, tcfg)
    ckpt = os.path.join(out, f"{variant}_seed{seed}.dkpt")
    save_model(model, ckpt, extra_meta={"seed": seed,
                                        "x_min": ds.x_min,
                                        "x_max": ds.x_max})
    series = {"train_loss": result.train_loss}
    if result.val_loss:
        series["val_loss"] = result.val_loss
    write_series_csv(os.path.join(out, f"{variant}_seed{seed}_loss.csv"),
                     series, x_label="epoch")
    line_svg(series, os.path.join(out, f"{variant}_seed{seed}_loss.svg"),
             title=f"{variant} seed {seed} loss", x_label="epoch",
             y_label="mse")
    _write_manifest(out, cfg, seed, "train",
                    {"arch": variant, "n_params": model.n_params,
                     "final_train_loss": result.train_loss[-1],
                     "collapse_warnings": result.collapse_warnings})
    print(f"train: {variant} seed {seed}, {model.n_params} params, "
          f"final loss {result.train_loss[-1]:.3e}, checkpoint {ckpt}")
    return 0


def cmd_rollout(args) -> int:
    cfg = _load_config(args.config)
    seed = _effective_seed(cfg)
    out = args.output or cfg.get("output_dir", "out_rollout")
    os.makedirs(out, exist_ok=True)
    model, meta = load_model(cfg["checkpoint"])
    ds = read_dataset(cfg["dataset_dir"])
    split = cfg.get("split", "test")
    case_i = int(cfg.get("case", 0))
    cases = normalized_cases(ds, split)
    if case_i >= len(cases):
        raise ConfigError(f"case {case_i} outside split {split!r} "
                          f"({len(cases)} cases)")
    frames = cases[case_i]
    win = model.arch.window
    n_steps = frames.shape[0] - win
    if n_steps < 1:
        raise ConfigError("case too short for a rollout")
    if cfg.get("latent_only", False):
        if not hasattr(model, "k"):
            raise ConfigError("latent_only needs a kae checkpoint, got "
                              f"{meta.get('variant', '?')!r}")
        pred = kae_latent_rollout(model, frames[:win], n_steps)
    else:
        pred = rollout(model, frames[:win], n_steps)
    rec = ds.split(split)[case_i]
    series = rmse_series(pred, frames[win:], 1.0)
    write_series_csv(os.path.join(out, "rollout_rmse.csv"),
                     {"rmse": series})
    line_svg({"rmse": series}, os.path.join(out, "rollout_rmse.svg"),
             title=f"{meta.get('variant', '?')} rollout, case {case_i}",
             y_label="rmse (normalised)")
    heatmap_svg(pred[-1], os.path.join(out, "final_frame.svg"),
                title="predicted final frame (normalised)")
    np.savez_compressed(os.path.join(out, "rollout.npz"), pred=pred,
                        truth=frames[win:], u0=rec.u0, w0=rec.w0)
    _write_manifest(out, cfg, seed, "rollout",
                    {"n_steps": int(n_steps),
                     "mean_rmse": float(series.mean())})
    print(f"rollout: {n_steps} steps, mean rmse {series.mean():.4f}, "
          f"outputs in {out}")
    return 0


def cmd_rom(args) -> int:
    cfg = _load_config(args.config)
    seed = _effective_seed(cfg)
    out = args.output or cfg.get("output_dir", "out_rom")
    os.makedirs(out, exist_ok=True)
    ds = read_dataset(cfg["dataset_dir"])
    split = cfg.get("split", "train")
    rank = int(cfg.get("rank", 10))
    mode = cfg.get("mode", "dmd")
    cases = [rec.frames.astype(np.float64) for rec in ds.split(split)]
    if not cases:
        raise ConfigError(f"split {split!r} is empty")
    report = {"mode": mode, "rank": rank, "split": split}
    if mode == "pod":
        x = np.concatenate([trajectory_pairs(c)[0] for c in cases], axis=1)
        basis = pod_fit(x, rank)
        recon = pod_reconstruct(basis, x)
        err = float(np.linalg.norm(recon - x) / np.linalg.norm(x))
        np.savez_compressed(os.path.join(out, "pod_basis.npz"), basis=basis)
        report["relative_error"] = err
    elif mode == "dmd":
        x, xp = multi_trajectory_pairs(cases)
        model = dmd_fit(x, xp, rank)
        save_drom(model, os.path.join(out, "model.drom"))
        case0 = cases[0]
        pred = dmd_predict(model, case0.shape[0])
        truth = case0.reshape(case0.shape[0], -1).T
        err = float(np.linalg.norm(pred - truth) / np.linalg.norm(truth))
        write_series_csv(
            os.path.join(out, "eigvals.csv"),
            {"real": model.eigvals.real, "imag": model.eigvals.imag,
             "magnitude": np.abs(model.eigvals)}, x_label="mode")
        report["relative_error"] = err
    else:
        raise ConfigError(f"unknown rom mode {mode!r}")
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, cfg, seed, "rom", report)
    print(f"rom: {mode} rank {rank}, relative error "
          f"{report['relative_error']:.4f}, outputs in {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    seed = _effective_seed(cfg)
    out = args.output or cfg.get("output_dir", "out_evaluate")
    os.makedirs(out, exist_ok=True)
    ds = read_dataset(cfg["dataset_dir"])
    split = cfg.get("split", "test")
    cases_norm = normalized_cases(ds, split)
    records = ds.split(split)
    ckpts = cfg.get("checkpoints")
    if not ckpts:
        raise ConfigError("evaluate needs a checkpoints list")
    results = {}
    for item in ckpts:
        model, meta = load_model(item["path"])
        variant = item.get("model", meta.get("variant", "model"))
        mseed = int(item.get("seed", meta.get("seed", 0)))
        win = model.arch.window
        by_case = {}
        for ci, frames in enumerate(cases_norm):
            n_steps = frames.shape[0] - win
            if n_steps < 1:
                raise ConfigError(f"case {ci} too short for window {win}")
            pred = rollout(model, frames[:win], n_steps)
            case_max = float(frames[win:].max())
            by_case[ci] = rmse_series(pred, frames[win:], case_max)
        results.setdefault(variant, {})[mseed] = by_case
    totals = total_average_error(results)
    rows = winner_table(results)
    write_totals_csv(os.path.join(out, "totals.csv"), totals)
    write_winners_csv(os.path.join(out, "winners.csv"), rows)
    mean_series = {}
    for variant, by_seed in results.items():
        agg = aggregate_seeds({s: by_seed[s][0] for s in by_seed})
        mean_series[variant] = agg.mean
    write_series_csv(os.path.join(out, "rmse_case0.csv"), mean_series)
    line_svg(mean_series, os.path.join(out, "rmse_case0.svg"),
             title=f"case 0 rollout error ({split})", y_label="rmse")
    _write_manifest(out, cfg, seed, "evaluate", {"totals": totals})
    for variant in sorted(totals):
        print(f"evaluate: {variant} total average error "
              f"{totals[variant]:.4f}")
    print(f"evaluate: outputs in {out}")
    return 0


def cmd_plot(args) -> int:
    cfg = _load_config(args.config)
    seed = _effective_seed(cfg)
    out = args.output or cfg.get("output_dir", "out_plot")
    os.makedirs(out, exist_ok=True)
    made = []
    if "series_csv" in cfg:
        with open(cfg["series_csv"]) as fh:
            r = csv.reader(fh)
            header = next(r)
            cols = {name: [] for name in header[1:]}
            for row in r:
                for name, v in zip(header[1:], row[1:]):
                    if v:
                        cols[name].append(float(v))
        path = os.path.join(out, "series.svg")
        line_svg({k: np.array(v) for k, v in cols.items() if v}, path,
                 title=os.path.basename(cfg["series_csv"]),
                 x_label=header[0])
        made.append(path)
    if "dlf" in cfg:
        from .dataset import read_dlf
        cases, _, _ = read_dlf(cfg["dlf"])
        ci = int(cfg.get("case", 0))
        fi = int(cfg.get("frame", 0))
        if ci >= len(cases):
            raise ConfigError(f"case {ci} outside file ({len(cases)})")
        frames = cases[ci].frames
        fi = fi if fi >= 0 else frames.shape[0] + fi
        path = os.path.join(out, f"case{ci}_frame{fi}.svg")
        heatmap_svg(frames[fi], path,
                    title=f"case {ci} frame {fi} (Pa)")
        made.append(path)
        path = os.path.join(out, f"case{ci}_peaktime.svg")
        heatmap_svg(peak_time_map(frames.astype(np.float64)), path,
                    title=f"case {ci} peak arrival (frame index)")
        made.append(path)
    if not made:
        raise ConfigError("plot config needs 'series_csv' or 'dlf'")
    _write_manifest(out, cfg, seed, "plot", {"plots": made})
    print(f"plot: wrote {len(made)} figures to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ditchkit",
        description="Ditching load simulation, datasets and surrogates.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text, needs_config=True):
        sp = sub.add_parser(name, help=help_text)
        if needs_config:
            sp.add_argument("--config", required=(name != "train"),
                            help="JSON config file")
        sp.add_argument("--output", help="output directory override")
        sp.set_defaults(fn=fn)
        return sp

    add("simulate", cmd_simulate, "run one ditching case")
    add("sweep", cmd_sweep, "enumerate a velocity sweep")
    sp = add("dataset", cmd_dataset, "simulate a sweep into .dlf splits")
    sp.add_argument("--jobs", type=int, default=0,
                    help="parallel simulation workers")
    sp = add("train", cmd_train, "train a surrogate on a dataset")
    sp.add_argument("--arch", choices=ARCHITECTURES)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--count-params-only", action="store_true",
                    help="print the parameter count and exit")
    add("rollout", cmd_rollout, "autoregressive prediction of one case")
    add("rom", cmd_rom, "fit a POD or DMD baseline")
    add("evaluate", cmd_evaluate, "compare checkpoints on a split")
    add("plot", cmd_plot, "render CSV series or DLF frames to SVG")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DitchkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (KeyError, ValueError, TypeError) as exc:
        print(f"error: bad config ({exc})", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
