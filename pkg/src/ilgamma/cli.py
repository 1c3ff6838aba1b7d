"""Command-line entry point: ``ilgamma <command> ...``.

Exit status is 0 on success, 2 for invalid input (bad SMILES, data, config,
artifacts or arguments) and 3 for internal failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

from . import artifact, dataset
from .config import ConfigError, data_path, resolve
from .dataset import DataRecord, Split
from .ensemble import (
    Ensemble,
    EnsembleMemberError,
    as_ensemble,
    build_model,
    ensemble_predict,
    is_ensemble_manifest,
    load_ensemble,
    save_ensemble,
    train_ensemble,
)
from .evaluate import export_parity, full_report
from .featurizer import feature_rows_csv, featurize
from .mcm import OutOfMatrixError
from .trainer import train

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTERNAL = 3

logger = logging.getLogger("ilgamma")


class InputError(ValueError):
    pass


# helpers ----------------------------------------------------------------------

def _emit(payload, as_json: bool, human: str | None = None) -> None:
    if as_json or human is None:
        sys.stdout.write(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    else:
        sys.stdout.write(human.rstrip("\n") + "\n")


def _load_records(path) -> list[DataRecord]:
    return dataset.load(data_path(path))


def _load_split(path) -> tuple[Split, dict]:
    if path is None:
        raise InputError("--splits is required")
    return dataset.load_split(path)


def _load_predictor(path: str) -> Ensemble:
    if is_ensemble_manifest(path):
        return load_ensemble(path)
    return as_ensemble(artifact.load(path))


def _config(args, extra: dict | None = None):
    overrides = {
        "seed": getattr(args, "seed", None),
        "model.kind": getattr(args, "model", None),
        "train.max_epochs": getattr(args, "max_epochs", None),
        "train.initial_lr": getattr(args, "lr", None),
        "train.batch_size": getattr(args, "batch_size", None),
        "train.early_stop_patience": getattr(args, "patience", None),
    }
    overrides.update(extra or {})
    return resolve(getattr(args, "config", None), overrides)


# commands ---------------------------------------------------------------------

def cmd_split(args) -> int:
    records = _load_records(args.data)
    run = _config(args, {
        "split.mode": args.mode,
        "split.val_fraction": args.val_fraction,
        "split.test_fraction": args.test_fraction,
        "split.stratified": args.stratified or None,
    })
    mode, seed = run.get("split.mode"), run.get("seed")
    val_f, test_f = run.get("split.val_fraction"), run.get("split.test_fraction")
    if mode == "prediction":
        test_indices = None
        if args.test_manifest:
            test_indices = _read_indices(args.test_manifest)
        split = dataset.split_prediction(
            records, test_indices, seed,
            val_fraction=0.1 if val_f is None else val_f,
            test_fraction=0.1 if test_f is None else test_f,
        )
    elif mode == "generalization":
        split = dataset.split_generalization(
            records, seed,
            test_fraction=0.05 if test_f is None else test_f,
            val_fraction=0.05 if val_f is None else val_f,
            stratified=run.get("split.stratified"),
        )
    else:
        raise InputError(f"unknown split mode {mode!r}")
    dataset.save_split(split, args.out, mode=mode, seed=seed, num_records=len(records))
    summary = {"mode": mode, "seed": seed, "train": len(split.train), "val": len(split.val),
               "test": len(split.test), "out": str(args.out)}
    _emit(summary, args.json, f"{mode} split (seed {seed}): train {len(split.train)}, "
                              f"val {len(split.val)}, test {len(split.test)} -> {args.out}")
    return EXIT_OK


def _read_indices(path) -> list[int]:
    payload = json.loads(Path(path).read_text())
    if isinstance(payload, dict):
        payload = payload.get("test", payload.get("test_indices"))
    if not isinstance(payload, list):
        raise InputError(f"{path}: expected a JSON list of record indices or a split file")
    return [int(i) for i in payload]


def cmd_train(args) -> int:
    run = _config(args)
    records = _load_records(args.data)
    split, _ = _load_split(args.splits)
    train_records, val_records, _ = split.take(records)
    kind = run.model_kind
    model = build_model(kind, run.model_config(), run.get("seed"), train_records + val_records)
    model, history = train(model, train_records, val_records, run.train_config())
    artifact.save(model, args.out)
    if args.history:
        history.to_csv(args.history)
    run.dump(str(args.out) + ".config.json")
    best = history.best_epoch
    summary = {"model": kind, "out": str(args.out), "epochs": len(history), "best_epoch": best,
               "best_val_loss": history.val_loss[best - 1], "best_val_mae": history.val_mae[best - 1]}
    _emit(summary, args.json, f"trained {kind}: {len(history)} epochs, best epoch {best}, "
                              f"val MSE {summary['best_val_loss']:.5f} -> {args.out}")
    return EXIT_OK


def cmd_train_ensemble(args) -> int:
    run = _config(args, {"ensemble.n": args.n, "ensemble.parallel": args.parallel})
    records = _load_records(args.data)
    split, meta = _load_split(args.splits)
    mode = meta.get("mode", run.get("split.mode"))
    ens = train_ensemble(
        records, split.test, n=run.get("ensemble.n"), mode=mode, kind=run.model_kind,
        model_config=run.model_config(), train_config=run.values["train"],
        base_seed=run.get("seed"), parallel=run.get("ensemble.parallel"),
        val_fraction=run.get("split.val_fraction"),
    )
    manifest = save_ensemble(ens, args.out)
    run.dump(Path(args.out) / "run_config.json")
    summary = {"members": len(ens), "seeds": ens.seeds, "manifest": str(manifest),
               "val_losses": ens.val_losses}
    _emit(summary, args.json, f"trained {len(ens)} members -> {manifest}")
    return EXIT_OK


def _predict_rows(ens: Ensemble, rows: list[DataRecord]) -> list[dict]:
    try:
        mean, std = ensemble_predict(ens, rows)
    except EnsembleMemberError as exc:
        if isinstance(exc.cause, OutOfMatrixError):
            raise InputError(
                f"not predictable by MCM, use GNN ({exc.cause}; member {exc.index})"
            ) from exc
        raise
    t_lo, t_hi = ens.t_range
    out = []
    for r, m, s in zip(rows, mean, std):
        out.append({
            "cation_smiles": r.cation_smiles,
            "anion_smiles": r.anion_smiles,
            "solute_smiles": r.solute_smiles,
            "temperature_K": r.temperature,
            "ln_gamma_inf": float(m),
            "gamma_inf": math.exp(float(m)),
            "extrapolated": not (t_lo <= r.temperature <= t_hi),
            "spread": float(s) if len(ens) > 1 else None,
        })
    return out


def _query(cation, anion, solute, temperature, cation_family, solute_family) -> DataRecord:
    record = DataRecord(cation, anion, solute, float(temperature), 0.0,
                        solute_family or "unknown", cation_family or "unknown")
    for smiles in record.molecules:
        featurize(smiles)  # surface parse errors with offsets before predicting
    if not record.temperature > 0:
        raise InputError("temperature must be positive (kelvin)")
    return record


def cmd_predict(args) -> int:
    ens = _load_predictor(args.model)
    if args.batch:
        rows = _read_batch(args.batch)
    else:
        needed = {"--cation": args.cation, "--anion": args.anion, "--solute": args.solute,
                  "--temperature": args.temperature}
        missing = [k for k, v in needed.items() if v is None]
        if missing:
            raise InputError(f"missing {', '.join(missing)} (or give --batch)")
        rows = [_query(args.cation, args.anion, args.solute, args.temperature,
                       args.cation_family, args.solute_family)]
    results = _predict_rows(ens, rows)
    if args.out:
        _write_predictions(results, args.out)
    if args.batch and not args.json:
        if not args.out:
            buffer = io.StringIO()
            _write_predictions(results, buffer)
            sys.stdout.write(buffer.getvalue())
        return EXIT_OK
    payload = results if args.batch else results[0]
    r = results[0]
    human = (f"ln gamma_inf = {r['ln_gamma_inf']:.4f}   gamma_inf = {r['gamma_inf']:.4f}"
             + ("   [extrapolated temperature]" if r["extrapolated"] else "")
             + (f"   spread {r['spread']:.4f}" if r["spread"] is not None else ""))
    _emit(payload, args.json, None if args.batch else human)
    return EXIT_OK


_OUT_COLUMNS = ("cation_smiles", "anion_smiles", "solute_smiles", "temperature_K",
                "ln_gamma_inf", "gamma_inf", "extrapolated", "spread")


def _write_predictions(results: list[dict], target) -> None:
    handle = open(target, "w", newline="") if isinstance(target, (str, Path)) else target
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(_OUT_COLUMNS)
        for r in results:
            writer.writerow([
                r["cation_smiles"], r["anion_smiles"], r["solute_smiles"], repr(r["temperature_K"]),
                repr(r["ln_gamma_inf"]), repr(r["gamma_inf"]), int(r["extrapolated"]),
                "" if r["spread"] is None else repr(r["spread"]),
            ])
    finally:
        if handle is not target:
            handle.close()


def _read_batch(path) -> list[DataRecord]:
    rows = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        need = ("cation_smiles", "anion_smiles", "solute_smiles", "temperature_K")
        missing = [c for c in need if c not in (reader.fieldnames or [])]
        if missing:
            raise InputError(f"{path}: missing columns {missing}")
        for row in reader:
            try:
                rows.append(_query(
                    row["cation_smiles"].strip(), row["anion_smiles"].strip(),
                    row["solute_smiles"].strip(), float(row["temperature_K"]),
                    (row.get("cation_family") or "").strip(),
                    (row.get("solute_family") or "").strip(),
                ))
            except ValueError as exc:
                raise InputError(f"{path}:{reader.line_num}: {exc}") from exc
    return rows


def cmd_evaluate(args) -> int:
    ens = _load_predictor(args.model)
    records = _load_records(args.data)
    split, _ = _load_split(args.splits)
    subset = [records[i] for i in getattr(split, args.subset)]
    if not subset:
        raise InputError(f"the {args.subset} subset is empty")
    pred, _ = ensemble_predict(ens, subset)
    report = full_report(pred, subset)
    payload = report.to_dict()
    payload["subset"] = args.subset
    if args.parity:
        counts = export_parity(pred, [r.ln_gamma for r in subset], args.parity,
                               [r.solute_family for r in subset], plot_path=args.plot)
        payload["band_inside"] = counts.inside
        payload["band_outside"] = counts.outside
    human = report.table()
    if args.parity:
        human += f"\n\n+-0.5 band: {payload['band_inside']} inside, {payload['band_outside']} outside"
    _emit(payload, args.json, human)
    return EXIT_OK


def cmd_featurize(args) -> int:
    graph = featurize(args.smiles)
    nodes, edges = feature_rows_csv(graph)
    if args.out_prefix:
        Path(f"{args.out_prefix}_nodes.csv").write_text(nodes)
        Path(f"{args.out_prefix}_edges.csv").write_text(edges)
    if args.json:
        _emit({
            "smiles": args.smiles,
            "node_features": graph.node_features.astype(int).tolist(),
            "edge_index": graph.edge_index.tolist(),
            "edge_features": graph.edge_features.astype(int).tolist(),
        }, True)
    elif not args.out_prefix:
        sys.stdout.write("# nodes\n" + nodes + "# edges\n" + edges)
    return EXIT_OK


def cmd_inspect(args) -> int:
    if is_ensemble_manifest(args.artifact):
        ens = load_ensemble(args.artifact)
        payload = {"kind": "ensemble", "members": len(ens), "seeds": ens.seeds, "mode": ens.mode,
                   "t_range": list(ens.t_range)}
        _emit(payload, args.json, None)
        return EXIT_OK
    info = artifact.inspect(args.artifact)
    human = "\n".join([
        f"kind               {info['kind']}",
        f"featurizer version {info['featurizer_version']}",
        f"parameters         {info['num_parameters']} in {info['num_tensors']} tensors",
        f"temperature range  {info['t_min']} .. {info['t_max']} K",
        f"seed               {info['seed']}",
        f"sha256             {info['sha256']}",
        "config             " + json.dumps(info["config"], sort_keys=True),
    ])
    _emit(info, args.json, human)
    return EXIT_OK


# parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ilgamma",
        description="Infinite-dilution activity coefficients of solutes in ionic liquids.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True, config=False):
        p.add_argument("--json", action="store_true", help="machine-readable JSON output")
        if data:
            p.add_argument("--data", help="records CSV (default: $ILGAMMA_DATA_DIR/records.csv)")
        if config:
            p.add_argument("--config", help="YAML or JSON configuration file")
            p.add_argument("--seed", type=int)
            p.add_argument("--model", choices=("gnn", "mcm"))
            p.add_argument("--max-epochs", type=int)
            p.add_argument("--lr", type=float)
            p.add_argument("--batch-size", type=int)
            p.add_argument("--patience", type=int, help="early-stopping patience in epochs")

    p = sub.add_parser("split", help="write a train/val/test split manifest")
    common(p, config=True)
    p.add_argument("--mode", choices=("prediction", "generalization"))
    p.add_argument("--test-manifest", help="fixed test membership (JSON index list or split file)")
    p.add_argument("--val-fraction", type=float)
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--stratified", action="store_true",
                   help="sample held-out ions and solutes separately")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train one model")
    common(p, config=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--out", required=True, help="model artifact path")
    p.add_argument("--history", help="per-epoch history CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-ensemble", help="train N members on re-randomized splits")
    common(p, config=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--parallel", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train_ensemble)

    p = sub.add_parser("predict", help="predict ln gamma_inf")
    common(p, data=False)
    p.add_argument("--model", required=True, help="model artifact or ensemble manifest")
    p.add_argument("--cation")
    p.add_argument("--anion")
    p.add_argument("--solute")
    p.add_argument("--temperature", type=float, help="kelvin")
    p.add_argument("--cation-family", help="needed by MCM models only")
    p.add_argument("--solute-family", help="needed by MCM models only")
    p.add_argument("--batch", help="CSV with cation_smiles, anion_smiles, solute_smiles, temperature_K")
    p.add_argument("--out", help="write predictions as CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="metrics on a split subset")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--subset", choices=("train", "val", "test"), default="test")
    p.add_argument("--parity", help="parity data CSV")
    p.add_argument("--plot", help="render the parity plot (needs matplotlib)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("featurize", help="print node and edge feature matrices")
    common(p, data=False)
    p.add_argument("--smiles", required=True)
    p.add_argument("--out-prefix", help="write <prefix>_nodes.csv and <prefix>_edges.csv")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("inspect-model", help="verify and summarize an artifact")
    common(p, data=False)
    p.add_argument("artifact")
    p.set_defaults(func=cmd_inspect)
    return parser


def _is_input_error(exc: BaseException) -> bool:
    if isinstance(exc, EnsembleMemberError):
        return _is_input_error(exc.cause)
    return isinstance(exc, (ValueError, KeyError, OSError, ConfigError))


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except Exception as exc:  # map to exit classes; details to stderr
        if _is_input_error(exc):
            message = str(exc.args[0]) if isinstance(exc, KeyError) and exc.args else str(exc)
            print(f"ilgamma {args.command}: error: {message}", file=sys.stderr)
            return EXIT_INPUT
        logger.exception("internal error")
        print(f"ilgamma {args.command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
