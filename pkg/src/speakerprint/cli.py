"""Command-line entry point: ``speakerprint <command> [options]``.

Exit status is 0 on success, 1 on a domain error (a JSON error object is
written to stderr) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import features, registry, simbench, stats, stimulus

SEED_ENV = "SPEAKERPRINT_SEED"


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV, "1"))


def _emit(args, payload: dict, human: str | None = None):
    if args.json or human is None:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(human)


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _alpha_grid(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}")
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad alpha grid {text!r}")
    n = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(n), 10)


def cmd_synth(args):
    spec = stimulus.StimulusSpec(args.start, args.end, args.step, args.dur, args.rate,
                                 args.amplitude, args.phase, args.phase_seed)
    buf = stimulus.synthesize(spec)
    stimulus.write_wav(buf, args.output)
    if args.spec_out:
        _write_json(args.spec_out, spec.to_dict())
    _emit(args, {"output": str(args.output), "tones": spec.tone_count, "samples": len(buf),
                 "papr": stimulus.papr(buf.samples) if len(buf) else None, "spec_id": spec.spec_id},
          f"wrote {args.output}: {spec.tone_count} tones, {len(buf)} samples")


def _load_spec(path):
    if path is None:
        return stimulus.StimulusSpec()
    with open(path) as fh:
        return stimulus.StimulusSpec.from_dict(json.load(fh))


def cmd_extract(args):
    spec = _load_spec(args.spec)
    rec = stimulus.read_wav(args.input)
    feat = features.extract(rec, spec, args.segments, device_label=args.label)
    features.write_jsonl([feat], args.output, append=args.append)
    _emit(args, {"output": str(args.output), "spec_id": feat.spec_id, "dimension": len(feat)},
          f"wrote 1 feature ({len(feat)} values) to {args.output}")


def cmd_enroll(args):
    reg = registry.Registry.load(args.registry)
    feats = features.read_jsonl(args.input)
    if not feats:
        raise ValueError(f"{args.input}: no features")
    for f in feats:
        dev = args.id or f.device_label
        if not dev:
            raise ValueError("no --id given and feature has no device_label")
        reg.enroll(f, dev)
    _emit(args, {"registry": str(args.registry), "enrolled": len(feats), "devices": len(reg)},
          f"enrolled {len(feats)} feature(s); registry holds {len(reg)} device(s)")


def cmd_match(args):
    reg = registry.Registry.load(args.registry)
    probes = features.read_jsonl(args.input)
    if len(probes) < args.samples:
        raise ValueError(f"{args.input}: need {args.samples} probe(s), found {len(probes)}")
    probes = probes[: args.samples]
    if args.lsh and len(reg):
        index = registry.lsh_build(reg, args.planes, args.tables, args.seed)
        decisions = [index.query(q, args.alpha) for q in probes]
        decision = registry.combine_decisions(decisions, args.alpha) if len(decisions) > 1 else decisions[0]
    else:
        decision = reg.identify_multisample(probes, args.alpha)
    out = decision.to_dict()
    if args.lsh:
        out["lsh"] = {"planes": args.planes, "tables": args.tables, "seed": args.seed}
    print(json.dumps(out, sort_keys=True))


def cmd_simulate(args):
    fleet = simbench.generate_fleet(args.devices, seed=args.seed)
    noise = simbench.NoiseProfile.parse(args.noise)
    report = simbench.run_experiment(fleet, args.samples, noise, args.alpha, args.seed,
                                     enrolled_per_device=args.enrolled, mode=args.mode)
    payload = report.to_dict()
    if args.output:
        _write_json(args.output, payload)
    if args.sims_csv:
        simbench.write_similarity_csv(report, args.sims_csv, args.max_cross)
    _emit(args, {k: payload[k] for k in ("fp_count", "fn_count", "query_count", "self_pairs",
                                         "cross_pairs", "config")},
          f"{report.query_count} queries: {report.fp_count} FP, {report.fn_count} FN "
          f"(alpha={args.alpha}, seed={args.seed})")


def cmd_fit(args):
    sims = simbench.read_similarity_csv(args.input, args.column)
    fit = stats.fit_similarities(sims)
    payload = {"column": args.column, **fit.to_dict()}
    if args.output:
        _write_json(args.output, payload)
    _emit(args, payload, f"{args.column}: mu={fit.mu:.6g} sigma={fit.sigma:.6g} (n={fit.n})")


def _load_fit(path, default):
    if path is None:
        return default
    with open(path) as fh:
        return stats.LognormalFit.from_dict(json.load(fh))


def cmd_analyze(args):
    model = stats.ErrorModel(_load_fit(args.fit_self, stats.PUBLISHED_SELF),
                             _load_fit(args.fit_corr, stats.PUBLISHED_CORR))
    curve = stats.error_curve(model, args.alpha_grid, args.samples)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "fp", "fn", "total"])
            for a, fp, fn, tot in curve:
                w.writerow([f"{a:.6f}", repr(float(fp)), repr(float(fn)), repr(float(tot))])
    a_opt, err = stats.optimal_threshold(model, args.samples)
    payload = {"samples": args.samples, "optimal_alpha": a_opt, "error": err,
               "entropy_bits": stats.entropy_bits(err)}
    _emit(args, payload, f"optimal alpha {a_opt:.4f}: error {err:.4g} ({payload['entropy_bits']:.2f} bits)")


def cmd_snr(args):
    req = stats.snr_requirement(args.alpha)
    _emit(args, req.to_dict(), f"alpha={args.alpha}: SNR >= {req.linear:.4g} ({req.db:.2f} dB)")


def cmd_stability(args):
    if args.input:
        feats = features.read_jsonl(args.input)
    else:
        fleet = simbench.generate_fleet(args.devices, seed=args.seed)
        feats = simbench.stability_series(fleet, args.samples, simbench.NoiseProfile.parse(args.noise),
                                          args.seed)
    m = simbench.stability_matrix(feats)
    simbench.write_matrix_csv(m, args.output)
    _emit(args, {"output": str(args.output), "size": m.shape[0], "seed": None if args.input else args.seed},
          f"wrote {m.shape[0]}x{m.shape[0]} similarity matrix to {args.output}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable stdout")
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=_default_seed(),
                        help=f"master seed (default ${SEED_ENV} or 1)")

    p = argparse.ArgumentParser(prog="speakerprint", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write the stimulus WAV")
    s.add_argument("--start", type=float, default=14000.0)
    s.add_argument("--end", type=float, default=21000.0)
    s.add_argument("--step", type=float, default=100.0)
    s.add_argument("--dur", type=float, default=1.0)
    s.add_argument("--rate", type=int, default=44100)
    s.add_argument("--amplitude", type=float, default=0.9)
    s.add_argument("--phase", choices=stimulus.PHASE_SCHEMES, default="newman")
    s.add_argument("--phase-seed", type=int, default=None)
    s.add_argument("--spec-out", help="also save the stimulus spec as JSON")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("extract", parents=[common], help="feature vector from a recording")
    s.add_argument("-i", "--input", required=True)
    s.add_argument("--spec", help="stimulus spec JSON (default comb)")
    s.add_argument("--label", default=None)
    s.add_argument("--segments", type=int, default=1)
    s.add_argument("--append", action="store_true")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("enroll", parents=[common], help="add features to a registry")
    s.add_argument("-r", "--registry", required=True)
    s.add_argument("-i", "--input", required=True)
    s.add_argument("--id", default=None)
    s.set_defaults(func=cmd_enroll)

    s = sub.add_parser("match", parents=[common, seeded], help="identify probe features")
    s.add_argument("-r", "--registry", required=True)
    s.add_argument("-i", "--input", required=True)
    s.add_argument("--alpha", type=float, default=0.7)
    s.add_argument("--samples", type=int, default=1)
    s.add_argument("--lsh", action="store_true")
    s.add_argument("--planes", type=int, default=12)
    s.add_argument("--tables", type=int, default=8)
    s.set_defaults(func=cmd_match)

    s = sub.add_parser("simulate", parents=[common, seeded], help="run the simulated fleet experiment")
    s.add_argument("--devices", type=int, default=50)
    s.add_argument("--samples", type=int, default=60)
    s.add_argument("--enrolled", type=int, default=1)
    s.add_argument("--alpha", type=float, default=0.7)
    s.add_argument("--noise", default="silent")
    s.add_argument("--mode", choices=("spectral", "waveform"), default="spectral")
    s.add_argument("--sims-csv", help="write self/cross similarities as CSV")
    s.add_argument("--max-cross", type=int, default=None, help="subsample the cross column")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", parents=[common], help="lognormal fit of a similarity column")
    s.add_argument("-i", "--input", required=True)
    s.add_argument("--column", choices=("self", "cross"), required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("analyze", parents=[common], help="analytic error curve")
    s.add_argument("--fit-self", help="default: published fit")
    s.add_argument("--fit-corr", help="default: published fit")
    s.add_argument("--alpha-grid", type=_alpha_grid, default=_alpha_grid("0.5:0.95:0.001"))
    s.add_argument("--samples", type=int, default=1)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("snr", parents=[common], help="in-band SNR needed for a threshold")
    s.add_argument("--alpha", type=float, default=0.7)
    s.set_defaults(func=cmd_snr)

    s = sub.add_parser("stability", parents=[common, seeded], help="pairwise similarity matrix CSV")
    s.add_argument("-i", "--input", help="features JSONL (default: simulate)")
    s.add_argument("--devices", type=int, default=2)
    s.add_argument("--samples", type=int, default=60)
    s.add_argument("--noise", default="silent")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_stability)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (ValueError, LookupError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
