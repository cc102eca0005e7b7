"""Command-line driver: ``fecgcs <command> [options]``.

Exit codes: 0 on success, 1 on a numerical failure, 2 on a usage or I/O
error. Errors are reported on stderr as ``error [<stage>]: <message>``.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__, bsbl, experiments, ica, metrics, sensing, synth
from .plotting import sweep_svg
from .seeds import derive_seed
from .signal_io import (FormatError, load_payload, load_recording,
                        save_matrix, save_payload, save_recording)
from .wavelet import max_levels, wavelet_compression_ops

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class StageError(Exception):
    def __init__(self, stage: str, message: str, code: int):
        super().__init__(message)
        self.stage = stage
        self.code = code


@contextlib.contextmanager
def stage(name: str):
    """Label failures with the pipeline stage and map them to exit codes."""
    try:
        yield
    except StageError:
        raise
    except (np.linalg.LinAlgError, sensing.RankError, FloatingPointError, ica.IcaError) as exc:
        raise StageError(name, str(exc), EXIT_NUMERIC) from exc
    except (OSError, FormatError, ValueError, KeyError) as exc:
        raise StageError(name, str(exc), EXIT_USAGE) from exc


# ---------------------------------------------------------------- helpers

def _band(text: str) -> tuple:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must look like LOW:HIGH, got {text!r}") from None
    return lo, hi


def _lambda(text: str):
    if text in ("auto", "learn"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--lambda takes auto, learn or a number, got {text!r}") from None


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _bsbl_config(args) -> bsbl.BsblConfig:
    return bsbl.BsblConfig(learn_correlation=args.learn_corr, lambda_mode=args.lam,
                           max_iterations=args.max_iter, convergence_tol=args.tol,
                           prune_threshold=args.prune_threshold)


def _rows_arg(args, N):
    if args.M is not None:
        return args.M
    return sensing.rows_for_cr(N, args.cr)


def _add_bsbl_flags(p):
    p.add_argument("--block-size", type=int, default=32, help="uniform block size h")
    p.add_argument("--learn-corr", type=_on_off, default=True, metavar="{on,off}",
                   help="learn the intra-block AR(1) correlation (default on)")
    p.add_argument("--max-iter", type=int, default=25)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--lambda", dest="lam", type=_lambda, default="auto",
                   help="auto (noiseless), learn, or a fixed noise variance")
    p.add_argument("--prune-threshold", type=float, default=0.0)
    p.add_argument("--domain", choices=("time", "wavelet"), default="time")


def _add_matrix_flags(p, d_default=12):
    p.add_argument("--N", type=int, default=512, help="window length")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--M", type=int, default=None, help="rows of the sensing matrix")
    g.add_argument("--cr", type=float, default=50.0, help="compression ratio in percent")
    p.add_argument("--d", type=int, default=d_default, help="ones per column")


def _pipeline_config(args, seed: int) -> experiments.PipelineConfig:
    cr = args.cr if args.M is None else sensing.compression_ratio(args.N, args.M)
    return experiments.PipelineConfig(
        cr=cr, d=args.d, block_size=args.block_size, window_length=args.N,
        domain=args.domain, bsbl=_bsbl_config(args), band=args.band, k=args.k,
        matrix_seed=derive_seed(seed, experiments.MATRIX_STREAM, 0, 0),
        ica_seed=derive_seed(seed, experiments.ICA_STREAM, 0))


def _synth_spec(args, seed: int) -> synth.SynthSpec:
    return synth.SynthSpec(sinr_db=args.sinr, channels=args.channels, samples=args.samples,
                           sampling_rate_hz=args.fs, seed=seed)


# ---------------------------------------------------------------- commands

def cmd_synth(args):
    with stage("synth"):
        spec = replace(_synth_spec(args, args.seed), include_maternal=not args.no_maternal)
        res = synth.generate(spec)
    with stage("write"):
        out = _out_dir(args)
        save_recording(res.recording, out / "recording.csv")
        for name in ("fecg", "mecg", "noise"):
            save_matrix(getattr(res, name).T, out / f"{name}.csv")
        save_matrix(np.vstack([res.fetal_source, res.maternal_source]).T, out / "sources.csv")
        sir, snr, sinr = synth.check_targets(res)
        _write_json(out / "synth.json", {"spec": asdict(spec), "measured": {
            "sir_db": sir, "snr_db": snr, "sinr_db": sinr}})
    print(f"wrote {out}/recording.csv ({spec.channels} x {spec.samples}), SINR {sinr:.3f} dB")


def cmd_gen_matrix(args):
    with stage("generate"):
        phi = sensing.generate_matrix(_rows_arg(args, args.N), args.N, args.d, args.seed)
    with stage("write"):
        out = _out_dir(args)
        desc = dict(phi.descriptor(), requested_seed=int(phi.requested_seed))
        _write_json(out / "matrix.json", desc)
        (out / "columns.csv").write_text(sensing.dump_columns(phi))
    print(json.dumps(desc, sort_keys=True))


def cmd_compress(args):
    with stage("load"):
        rec = load_recording(args.input, args.fs, header=args.header)
    with stage("generate"):
        phi = sensing.generate_matrix(_rows_arg(args, args.N), args.N, args.d, args.seed)
    with stage("compress"):
        payloads = experiments.compress_recording(rec, phi)
    with stage("write"):
        out = _out_dir(args)
        for p in payloads:
            save_payload(p, out / f"payload_ch{p.channel:02d}.csv")
    print(f"wrote {len(payloads)} payloads (M={phi.M}, N={phi.N}, d={phi.d}, seed={phi.seed}) to {out}")


def cmd_reconstruct(args):
    with stage("load"):
        payloads = [load_payload(p) for p in args.payloads]
    with stage("reconstruct"):
        rec = bsbl.reconstruct_recording(payloads, args.block_size, _bsbl_config(args),
                                         args.fs, args.domain)
    with stage("write"):
        out = _out_dir(args)
        save_recording(rec, out / "reconstructed.csv")
    print(f"wrote {out}/reconstructed.csv ({rec.channels} x {rec.samples})")


def cmd_ica(args):
    with stage("load"):
        rec = load_recording(args.input, args.fs, header=args.header)
        ref = load_recording(args.reference, args.fs, header=args.header) if args.reference else None
    with stage("ica"):
        res = ica.extract(rec, k=args.k, seed=args.seed, band=args.band)
        report = {"k_extracted": res.k_extracted,
                  "converged": [bool(v) for v in res.converged],
                  "iterations": [int(v) for v in res.iterations]}
        if ref is not None:
            res_ref = ica.extract(ref, k=args.k, seed=args.seed, band=args.band)
            report["matching"] = ica.match_components(res, res_ref).to_dict()
    with stage("write"):
        out = _out_dir(args)
        save_matrix(res.components.T, out / "components.csv")
        _write_json(out / "ica_report.json", report)
    print(json.dumps(report, sort_keys=True))


def cmd_eval(args):
    with stage("load"):
        a = load_recording(args.a, args.fs, header=args.header)
        b = load_recording(args.b, args.fs, header=args.header)
        if a.data.shape != b.data.shape:
            raise StageError("load", f"shape mismatch {a.data.shape} vs {b.data.shape}", EXIT_USAGE)
    with stage("eval"):
        records = []
        for c in range(a.channels):
            pa = metrics.detect_peaks(a.data[c], args.fs)
            pb = metrics.detect_peaks(b.data[c], args.fs)
            records.append({"channel": c, "mse": metrics.mse(a.data[c], b.data[c]),
                            "pearson": metrics.pearson(a.data[c], b.data[c]),
                            "peaks_a": len(pa), "peaks_b": len(pb),
                            "peak_agreement": metrics.peak_agreement(pa, pb)})
        result = {"channels": records}
        if args.parts:
            parts = [load_recording(p, args.fs).data for p in args.parts]
            sir, snr, sinr = metrics.measure_sinr(*parts)
            result["sinr"] = {"sir_db": sir, "snr_db": snr, "sinr_db": sinr}
    with stage("write"):
        out = _out_dir(args)
        _write_json(out / "eval.json", result)
    print(json.dumps(result, sort_keys=True))


def cmd_pipeline(args):
    reference = None
    with stage("load"):
        if args.input:
            rec = load_recording(args.input, args.fs, header=args.header)
        else:
            spec = _synth_spec(args, derive_seed(args.seed, experiments.DATA_STREAM, 0))
            data = synth.generate(spec)
            rec, reference = data.recording, data.fetal_source
    with stage("pipeline"):
        cfg = _pipeline_config(args, args.seed)
        res = experiments.run_pipeline(rec, cfg, reference=reference)
    with stage("write"):
        out = _out_dir(args)
        save_recording(rec, out / "original.csv")
        save_recording(res.reconstructed, out / "reconstructed.csv")
        save_matrix(res.ica_original.components.T, out / "components_original.csv")
        save_matrix(res.ica_reconstructed.components.T, out / "components_reconstructed.csv")
        _write_json(out / "summary.json", res.summary())
        _write_json(out / "timing.json", res.runtime_s)
    print(f"fetal correlation {res.fetal_correlation:.4f}, peak agreement "
          f"{res.peak_agreement:.3f}, mean MSE {np.mean(res.channel_mse):.4g}")


def cmd_sweep(args):
    with stage("grid"):
        values = experiments.grid_values(args.kind, args.lo, args.hi, args.step)
        base_spec = _synth_spec(args, 0)
        base = _pipeline_config(args, args.seed)
    with stage("sweep"):
        report = experiments.run_sweep(args.kind, values, args.trials, args.seed,
                                       base_spec, base, jobs=args.jobs)
    with stage("write"):
        out = _out_dir(args)
        text = report.to_csv()
        (out / f"sweep_{args.kind}.csv").write_text(text)
        (out / f"sweep_{args.kind}_timing.csv").write_text(report.timing_csv())
        (out / f"sweep_{args.kind}.svg").write_text(sweep_svg(text, f"{args.kind} sweep"))
    sys.stdout.write(text)


def opscount_table(N: int, M: int, ds, levels=None) -> list:
    """Rows of (method, additions, multiplications) for one window."""
    rows = []
    for d in ds:
        if not 1 <= d <= M:
            raise ValueError(f"need 1 <= d <= M, got d={d}")
        # every row is non-empty for a full-rank matrix: d*N - M additions
        rows.append((f"sparse-binary d={d}", d * N - M, 0))
    ops = wavelet_compression_ops(N, levels)
    lv = max_levels(N) if levels is None else levels
    rows.append((f"db4 DWT levels={lv}", ops.additions, ops.multiplications))
    return rows


def cmd_opscount(args):
    with stage("opscount"):
        if not 1 <= args.M <= args.N:
            raise ValueError(f"need 1 <= M <= N, got M={args.M}, N={args.N}")
        rows = opscount_table(args.N, args.M, args.d, args.levels)
    lines = [f"{'method':<24}{'additions':>12}{'multiplications':>18}"]
    lines += [f"{name:<24}{a:>12}{m:>18}" for name, a, m in rows]
    if args.N == 512 and args.M == 256:
        lines.append("reference (512x256): d=2 -> 768 additions, d=12 -> 5888 additions")
    print("\n".join(lines))
    if args.csv:
        with stage("write"):
            out = _out_dir(args)
            (out / "opscount.csv").write_text(
                "method,additions,multiplications\n" + "".join(f"{n},{a},{m}\n" for n, a, m in rows))


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress):
        # the copy attached to subcommands must not overwrite values given
        # before the command name, hence SUPPRESS defaults there
        g = argparse.ArgumentParser(add_help=False)
        dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g.add_argument("--seed", type=int, default=dflt(0), help="master seed (default 0)")
        g.add_argument("--out", default=dflt("."), help="output directory (default .)")
        g.add_argument("--jobs", type=int, default=dflt(1), help="worker processes for sweeps")
        g.add_argument("--config", default=dflt(None), help="JSON file of option defaults")
        return g

    common = global_flags(suppress=True)

    parser = argparse.ArgumentParser(prog="fecgcs", parents=[global_flags(suppress=False)],
                                     description="Compressed sensing of fetal ECG with BSBL-BO.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=func)
        return p

    def recording_flags(p):
        p.add_argument("--fs", type=float, default=250.0, help="sampling rate in Hz")
        p.add_argument("--header", action="store_true", help="skip one header row")

    def synth_flags(p):
        p.add_argument("--sinr", type=float, default=-15.0, help="SINR in dB")
        p.add_argument("--channels", type=int, default=8)
        p.add_argument("--samples", type=int, default=7680)

    def ica_flags(p):
        p.add_argument("--band", type=_band, default=ica.DEFAULT_BAND, help="LOW:HIGH in Hz")
        p.add_argument("--k", type=int, default=None, help="components (default: all)")

    p = add("synth", cmd_synth, "generate a synthetic mixture and its ground truth")
    synth_flags(p)
    p.add_argument("--fs", type=float, default=250.0)
    p.add_argument("--no-maternal", action="store_true")

    p = add("gen-matrix", cmd_gen_matrix, "generate a sparse binary sensing matrix")
    _add_matrix_flags(p)

    p = add("compress", cmd_compress, "compress every channel of a recording")
    p.add_argument("input")
    recording_flags(p)
    _add_matrix_flags(p)

    p = add("reconstruct", cmd_reconstruct, "reconstruct a recording from payload files")
    p.add_argument("payloads", nargs="+")
    p.add_argument("--fs", type=float, default=250.0)
    _add_bsbl_flags(p)

    p = add("ica", cmd_ica, "band-pass and run deflation FastICA on a recording")
    p.add_argument("input")
    p.add_argument("--reference", default=None, help="recording whose components are matched")
    recording_flags(p)
    ica_flags(p)

    p = add("eval", cmd_eval, "compare two recordings channel by channel")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--parts", nargs=3, metavar=("FECG", "MECG", "NOISE"), default=None,
                   help="ground-truth part files for an SINR measurement")
    recording_flags(p)

    for name, func, text in (("pipeline", cmd_pipeline, "compress, reconstruct and compare ICA extractions"),
                             ("sweep", cmd_sweep, "sweep one parameter over synthetic trials")):
        p = add(name, func, text)
        if name == "sweep":
            p.add_argument("kind", choices=experiments.SWEEP_KINDS)
            p.add_argument("--lo", type=float, default=None)
            p.add_argument("--hi", type=float, default=None)
            p.add_argument("--step", type=float, default=None)
            p.add_argument("--trials", type=int, default=20)
        else:
            p.add_argument("--input", default=None, help="recording CSV (default: synthetic)")
            p.add_argument("--header", action="store_true")
        p.add_argument("--fs", type=float, default=250.0)
        synth_flags(p)
        _add_matrix_flags(p)
        _add_bsbl_flags(p)
        ica_flags(p)

    p = add("opscount", cmd_opscount, "arithmetic cost of compressing one window")
    p.add_argument("--N", type=int, default=512)
    p.add_argument("--M", type=int, default=256)
    p.add_argument("--d", type=int, nargs="+", default=[2, 12])
    p.add_argument("--levels", type=int, default=None, help="DWT levels (default: full depth)")
    p.add_argument("--csv", action="store_true", help="also write opscount.csv to --out")
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults taken from the --config JSON file."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    with stage("config"):
        cfg = json.loads(Path(args.config).read_text())
        if not isinstance(cfg, dict):
            raise ValueError("config file must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise StageError("config", f"unknown config keys for {args.command}: {unknown}", EXIT_USAGE)
    sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if args.jobs < 1:
            raise StageError("usage", "--jobs must be >= 1", EXIT_USAGE)
        args.func(args)
    except StageError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return exc.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
