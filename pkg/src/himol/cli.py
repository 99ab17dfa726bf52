"""himol command-line interface.

Subcommands: pretrain, invert, sample, repair, eval, lowshot,
scaffold-split. Exit codes: 0 success, 1 user error (bad flags or files),
2 internal error. Randomness flows from --seed (HIMOL_SEED as fallback).
An optional plain-text config file supplies "key = value" defaults;
unknown keys are rejected; explicit flags win. Every run writes a JSON
echo of its effective configuration next to its primary output.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from pathlib import Path


from . import backbone as bb
from . import checkpoint, files, plots
from .chem import LexError, ParseError
from .classifier import KnnTanimotoClassifier
from .inversion import (
    InversionConfig,
    dataset_hash,
    load_embeddings,
    save_embeddings,
    train,
)
from .lowshot import InsufficientPool, LowShotTask, run_augmentation
from .metrics import evaluate
from .nspdk import NspdkConfig
from .repair import RepairFailed, repair
from .sampler import SamplerConfig, StrictExhausted, sample
from .splits import TooFewScaffolds, scaffold_split


class UserError(Exception):
    pass


USER_ERRORS = (
    UserError,
    FileNotFoundError,
    IsADirectoryError,
    files.FileFormatError,
    checkpoint.BadCheckpoint,
    TooFewScaffolds,
    InsufficientPool,
    StrictExhausted,
    LexError,
    ParseError,
    bb.UnknownToken,
    bb.EmptyCorpus,
    ValueError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UserError(message)


def _default_seed() -> int:
    return int(os.environ.get("HIMOL_SEED", "0"))


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=_default_seed(),
                        help="master random seed (env HIMOL_SEED)")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker cap for parallel sections")
    parser.add_argument("--config", type=str, default=None,
                        help="plain-text 'key = value' config file")


def _coerce(raw: str):
    lowered = raw.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def _apply_config_file(args: argparse.Namespace, argv: list[str]) -> None:
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    if not path.exists():
        raise UserError(f"config file {path} does not exist")
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UserError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        dest = key.replace("-", "_")
        if not hasattr(args, dest) or dest in ("config", "func"):
            raise UserError(f"{path}:{lineno}: unknown config key {key!r}")
        flag = "--" + dest.replace("_", "-")
        if any(a == flag or a.startswith(flag + "=") for a in argv):
            continue  # explicit flag wins
        setattr(args, dest, _coerce(raw))


def _echo(args: argparse.Namespace, out: str) -> None:
    payload = {
        k: v for k, v in vars(args).items() if k not in ("func",) and v is not None
    }
    files.write_config_echo(out, payload)


# -- subcommands -----------------------------------------------------------------


def cmd_pretrain(args) -> None:
    corpus, _ = files.read_molecules(args.corpus)
    config = bb.PretrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        cond_noise=args.cond_noise, uncond_prob=args.uncond_prob, seed=args.seed,
    )
    arch = bb.BackboneConfig(
        embed_dim=args.embed_dim, n_layers=args.layers, n_heads=args.heads,
        context=args.context,
    )
    model, history = bb.pretrain(corpus, config, arch)
    checkpoint.save_model(args.out, model)
    plots.plot_loss_curve(history, Path(args.out).with_suffix(".loss.png"),
                          "pretraining loss")
    _echo(args, args.out)
    print(f"pretrained on {len(corpus)} molecules; final loss {history[-1]:.4f}")


def cmd_invert(args) -> None:
    model = checkpoint.load_model(args.model)
    data, _ = files.read_molecules(args.data)
    config = InversionConfig(
        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        weight_decay=args.weight_decay, assign_epochs=args.assign_epochs,
        k=args.k, seed=args.seed, levels=args.levels, update_head=args.update_head,
    )
    state, log = train(data, model, config)
    save_embeddings(args.out, state, config, dataset_hash(data))
    plots.plot_loss_curve(log.epoch_loss, Path(args.out).with_suffix(".loss.png"),
                          "inversion loss")
    _echo(args, args.out)
    print(f"inverted {len(data)} molecules; final loss {log.epoch_loss[-1]:.4f}")


def cmd_sample(args) -> None:
    model = checkpoint.load_model(args.model)
    state, _ = load_embeddings(args.emb)
    train_smiles: list[str] = []
    if args.train:
        train_smiles, _ = files.read_molecules(args.train)
    elif args.strict:
        raise UserError("--strict needs --train for the novelty filter")
    config = SamplerConfig(
        max_samples=args.n, l=args.l, temperature=args.temperature,
        max_len=args.max_len, seed=args.seed, strict=args.strict,
        apply_repair=args.repair, greedy=args.greedy,
        interp_levels=args.interp_levels,
    )
    batch = sample(state, model, config, train_smiles)
    files.write_molecules(args.out, batch.molecules())
    if args.provenance:
        files.write_jsonl(args.provenance, [r.to_dict() for r in batch.records])
    _echo(args, args.out)
    print(
        f"wrote {len(batch.records)} molecules "
        f"(resampling ratio {batch.resampling_ratio:.2f})"
    )


def cmd_repair(args) -> None:
    molecules, _ = files.read_molecules(args.infile)
    outputs: list[str] = []
    traces: list[dict] = []
    failures = 0
    for smiles in molecules:
        try:
            trace = repair(smiles, seed=args.seed)
        except RepairFailed as err:
            trace = err.trace
            failures += 1
        outputs.append(trace.output)
        traces.append(trace.to_dict())
    files.write_molecules(args.out, outputs)
    if args.trace:
        files.write_jsonl(args.trace, traces)
    _echo(args, args.out)
    print(f"repaired {len(molecules) - failures}/{len(molecules)} strings")


def cmd_eval(args) -> None:
    gen, _ = files.read_molecules(args.gen)
    train_smiles, _ = files.read_molecules(args.train)
    test_smiles, _ = files.read_molecules(args.test)
    model = checkpoint.load_model(args.model) if args.model else None
    classifier = None
    if args.labels:
        labeled, labels = files.read_molecules(args.labels)
        if labels is None:
            raise UserError(f"{args.labels} must carry 0/1 labels")
        classifier = KnnTanimotoClassifier(k=args.knn_k).fit(labeled, labels)
    outcome = evaluate(
        gen, train_smiles, test_smiles, model, classifier,
        NspdkConfig(args.nspdk_radius, args.nspdk_distance, args.nspdk_width),
        apply_repair=args.repair, repair_seed=args.seed, jobs=args.jobs,
    )
    payload = outcome.raw.to_dict()
    if outcome.repaired is not None:
        payload = {"raw": outcome.raw.to_dict(), "repaired": outcome.repaired.to_dict()}
    files.write_json(args.out, payload)
    if not args.no_figures:
        base = Path(args.out)
        plots.plot_metric_bars(outcome.raw.to_dict(), base.with_suffix(".metrics.png"))
        plots.plot_size_histogram(gen, test_smiles, base.with_suffix(".sizes.png"))
    _echo(args, args.out)
    report = outcome.repaired or outcome.raw
    print(
        f"validity {report.validity:.1f}  uniqueness {report.uniqueness:.1f}  "
        f"novelty {report.novelty:.1f}"
    )


def cmd_lowshot(args) -> None:
    pool, pool_labels = files.read_molecules(args.pool)
    test, test_labels = files.read_molecules(args.test)
    if pool_labels is None or test_labels is None:
        raise UserError("lowshot needs labeled pool and test files")
    model = checkpoint.load_model(args.model)
    task = LowShotTask(pool, pool_labels, test, test_labels, shots=args.shots,
                       seeds=list(range(args.seed, args.seed + args.seeds)))
    result = run_augmentation(
        task,
        backbone=model,
        inversion_config=InversionConfig(
            epochs=args.epochs, lr=args.lr, weight_decay=0.0,
            k=args.k, assign_epochs=args.assign_epochs,
        ),
        sampler_config=SamplerConfig(temperature=args.temperature,
                                     max_len=args.max_len),
    )
    files.write_json(args.out, {
        "mean_delta": result.mean_delta,
        "ci95": list(result.ci95),
        "per_seed": result.per_seed,
        "skipped": [{"seed": s, "reason": r} for s, r in result.skipped],
    })
    if not args.no_figures:
        plots.plot_delta_scatter(result.per_seed,
                                 Path(args.out).with_suffix(".delta.png"))
    _echo(args, args.out)
    print(f"mean delta ROC-AUC {result.mean_delta:+.4f}  ci95 "
          f"[{result.ci95[0]:+.4f}, {result.ci95[1]:+.4f}]")


def cmd_scaffold_split(args) -> None:
    molecules, labels = files.read_molecules(args.data)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    if len(ratios) != 3:
        raise UserError("--ratios needs three comma-separated numbers")
    total = sum(ratios)
    ratios = tuple(r / total for r in ratios)
    train_set, valid_set, test_set = scaffold_split(molecules, ratios, args.seed)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    label_of = None
    if labels is not None:
        label_of = dict(zip(molecules, labels))
    for name, subset in (("train", train_set), ("valid", valid_set), ("test", test_set)):
        files.write_molecules(
            outdir / f"{name}.smi", subset,
            [label_of[s] for s in subset] if label_of else None,
        )
    _echo(args, outdir / "train.smi")
    print(f"split {len(molecules)} molecules into "
          f"{len(train_set)}/{len(valid_set)}/{len(test_set)}")


# -- parser ----------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(
        prog="himol",
        description=__doc__,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(func=func)
        _add_common(p)
        return p

    p = add("pretrain", cmd_pretrain, "train and freeze a backbone on a SMILES corpus")
    p.add_argument("--corpus", required=True, help="molecule list file")
    p.add_argument("--out", required=True, help="model checkpoint path")
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--cond-noise", type=float, default=0.1)
    p.add_argument("--uncond-prob", type=float, default=0.2)
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--context", type=int, default=128)

    p = add("invert", cmd_invert, "learn hierarchical prompt embeddings")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="embedding checkpoint path")
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--lr", type=float, default=0.3)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--assign-epochs", type=int, default=5)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--levels", choices=("s", "sd", "sid"), default="sid")
    p.add_argument("--update-head", action="store_true")

    p = add("sample", cmd_sample, "generate molecules by embedding interpolation")
    p.add_argument("--model", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--l", type=float, default=0.0, help="lambda ~ U(l, 1-l)")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-len", type=int, default=96)
    p.add_argument("--strict", action="store_true",
                   help="resample past invalid/duplicate/training molecules")
    p.add_argument("--repair", action="store_true")
    p.add_argument("--greedy", action="store_true")
    p.add_argument("--train", help="training molecules for the strict filter")
    p.add_argument("--provenance", help="JSONL provenance output")
    p.add_argument("--interp-levels", choices=("id", "i", "d"), default="id",
                   help="advanced: which embedding levels interpolate")

    p = add("repair", cmd_repair, "fix invalid SMILES strings rule by rule")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="JSONL trace output")

    p = add("eval", cmd_eval, "score a generated set against train/test molecules")
    p.add_argument("--gen", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--model", help="backbone checkpoint for the frechet metric")
    p.add_argument("--labels", help="labeled molecules for the active-ratio classifier")
    p.add_argument("--knn-k", type=int, default=5)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--repair", action="store_true",
                   help="also score the repaired variant")
    p.add_argument("--nspdk-radius", type=int, default=2)
    p.add_argument("--nspdk-distance", type=int, default=4)
    p.add_argument("--nspdk-width", type=int, default=2**20)
    p.add_argument("--no-figures", action="store_true")

    p = add("lowshot", cmd_lowshot, "measure delta ROC-AUC with generated augmentation")
    p.add_argument("--pool", required=True, help="labeled pool file")
    p.add_argument("--test", required=True, help="labeled test file")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--shots", type=int, default=16)
    p.add_argument("--seeds", type=int, default=20, help="number of seeds")
    p.add_argument("--epochs", type=int, default=150, help="inversion epochs per class")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--assign-epochs", type=int, default=5)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--no-figures", action="store_true")

    p = add("scaffold-split", cmd_scaffold_split,
            "group by scaffold and split train/valid/test")
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ratios", default="80,10,10")

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config_file(args, argv)
        args.func(args)
        return 0
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except USER_ERRORS as exc:
        print(f"himol: error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
