"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 diverged training, 4 gradient
check over threshold, 1 any other package error. Every command accepts
--seed (falling back to the SYNGEN_SEED environment variable) and
persists its fully-resolved configuration, which can be replayed with
--config to reproduce a run byte for byte.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import autograd as ag
from .data import (
    CandidateIndexSpace,
    SubtaskKind,
    gold_frames,
    parse_dataset,
    parse_sentence,
)
from .errors import (
    DivergedTrainingError,
    IncompatibilityError,
    SynGenError,
)
from .evaluation import (
    attention_extract,
    attention_gap,
    position_labels,
    write_attention_csv,
    write_gap_csv,
    write_heatmap_dat,
)
from .gradcheck import finite_diff_report
from .inference import sequence_score
from .model import ModelConfig, SynGenModel
from .synth import generate_dataset, write_jsonl
from .training import TrainConfig, evaluate_dataset, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_GRADCHECK = 4

GRADCHECK_CONFIGS = (
    ("full", "pos_only"),
    ("no_graph", "pos_only"),
    ("no_gate", "pos_only"),
    ("no_graph_no_gate", "pos_only"),
    ("full", "token_only"),
    ("full", "pos_plus_token"),
)


def _env_seed():
    return int(os.environ.get("SYNGEN_SEED", "0"))


def _resolve(defaults, args):
    """Merge precedence: flags > config file > defaults."""
    merged = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            file_values = json.load(fh)
        unknown = set(file_values) - set(defaults)
        if unknown:
            raise SynGenError(f"config file {config_path}: unknown keys {sorted(unknown)}")
        merged.update(file_values)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _log_resolved(command, resolved):
    print(
        f"[syngen] resolved config: "
        f"{json.dumps({'command': command, **resolved}, sort_keys=True)}",
        file=sys.stderr,
    )


def _write_resolved(out_dir, command, resolved):
    _log_resolved(command, resolved)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "resolved_config.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"command": command, **resolved}, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"[syngen] resolved config -> {path}", file=sys.stderr)


def _model_config(cfg):
    return ModelConfig(
        d=cfg["d"],
        enc_layers=cfg["enc_layers"],
        dec_layers=cfg["dec_layers"],
        heads=cfg["heads"],
        blend_alpha=cfg["blend_alpha"],
        node_init=cfg["node_init"],
        ablation=cfg["ablation"],
        max_positions=cfg["max_positions"],
        dec_max_positions=cfg["max_positions"],
    )


# ---------------------------------------------------------------------------
# train

TRAIN_DEFAULTS = {
    "data": None,
    "dev": None,
    "out": "runs/train",
    "task": "triplet",
    "epochs": 200,
    "batch_size": 8,
    "d": 64,
    "enc_layers": 2,
    "dec_layers": 2,
    "heads": 4,
    "blend_alpha": 0.5,
    "node_init": "pos_only",
    "ablation": "full",
    "lr_gat": 1e-5,
    "lr_other": 1e-4,
    "gat_lr_x10": False,
    "clip_norm": 5.0,
    "no_clip": False,
    "seed": None,
    "eval_every": 20,
    "beam": 4,
    "max_positions": 64,
    "checkpoint_every": 0,
}


def cmd_train(args):
    cfg = _resolve(TRAIN_DEFAULTS, args)
    if cfg["seed"] is None:
        cfg["seed"] = _env_seed()
    if not cfg["data"]:
        raise UsageError("train requires --data")
    out_dir = Path(cfg["out"])
    _write_resolved(out_dir, "train", cfg)

    dataset = parse_dataset(cfg["data"])
    dev = parse_dataset(cfg["dev"]) if cfg["dev"] else None
    train_cfg = TrainConfig(
        subtask=SubtaskKind(cfg["task"]),
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        lr_gat=cfg["lr_gat"],
        lr_other=cfg["lr_other"],
        gat_lr_x10=cfg["gat_lr_x10"],
        seed=cfg["seed"],
        clip_norm=None if cfg["no_clip"] else cfg["clip_norm"],
        eval_every=cfg["eval_every"],
        beam_width=cfg["beam"],
        model=_model_config(cfg),
    )

    every = cfg["checkpoint_every"]

    def on_epoch(epoch, model, stats):
        if every and epoch % every == 0:
            model.save(out_dir / f"checkpoint_epoch{epoch:04d}.json")

    model, stats = train(dataset, train_cfg, dev=dev, on_epoch=on_epoch)
    model.save(out_dir / "checkpoint.json")
    stats.write_csv(out_dir / "stats.csv")
    final_loss = stats.epoch_losses[-1]
    print(f"[syngen] trained {train_cfg.epochs} epochs, final loss {final_loss:.6f}",
          file=sys.stderr)
    print(json.dumps({
        "checkpoint": str(out_dir / "checkpoint.json"),
        "stats": str(out_dir / "stats.csv"),
        "final_loss": final_loss,
    }, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate / decode

EVAL_DEFAULTS = {
    "checkpoint": None,
    "data": None,
    "task": "triplet",
    "beam": 4,
    "max_steps": 40,
    "constrained": False,
    "seed": None,
    "out": None,
}


def _load_for_eval(cfg):
    if not cfg["checkpoint"] or not cfg["data"]:
        raise UsageError("requires --checkpoint and --data")
    model = SynGenModel.load(cfg["checkpoint"])
    dataset = parse_dataset(cfg["data"])
    return model, dataset, SubtaskKind(cfg["task"])


def cmd_evaluate(args):
    cfg = _resolve(EVAL_DEFAULTS, args)
    _log_resolved("evaluate", cfg)
    model, dataset, kind = _load_for_eval(cfg)
    for sentence in dataset:
        # Surface missing gold fields before decoding anything.
        gold_frames(sentence, kind, CandidateIndexSpace(sentence.n))
    report, _ = evaluate_dataset(
        model, dataset, kind, beam_width=cfg["beam"], max_steps=cfg["max_steps"],
        constrained=cfg["constrained"],
    )
    print(report.to_json())
    return EXIT_OK


def cmd_decode(args):
    cfg = _resolve(EVAL_DEFAULTS, args)
    _log_resolved("decode", cfg)
    model, dataset, kind = _load_for_eval(cfg)
    from .inference import parse_sequence
    from .training import decode_sentence

    lines = []
    for sentence in dataset:
        space = CandidateIndexSpace(sentence.n)
        seq = decode_sentence(
            model, sentence, kind, beam_width=cfg["beam"],
            max_steps=cfg["max_steps"], constrained=cfg["constrained"],
        )
        result = parse_sequence(seq, kind, space)
        lines.append(json.dumps({
            "sentence_id": sentence.sentence_id,
            "predictions": [
                {
                    "aspect": [p.aspect.start, p.aspect.end],
                    "opinion": None if p.opinion is None else [p.opinion.start, p.opinion.end],
                    "polarity": p.polarity,
                }
                for p in result.predictions
            ],
            "malformed_frames": result.malformed_frames,
            "score": sequence_score(model, sentence, seq),
        }, sort_keys=True))
    text = "\n".join(lines) + "\n"
    if cfg["out"]:
        Path(cfg["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# gradcheck

GRADCHECK_DEFAULTS = {
    "d": 8,
    "n": 5,
    "enc_layers": 1,
    "dec_layers": 1,
    "heads": 2,
    "epsilon": 1e-5,
    "threshold": 1e-4,
    # Fixed default test point: at this seed no parameter's gradient falls
    # into the near-zero regime where a central difference only measures
    # the last-bit rounding of the loss (which the relative-error floor of
    # 1e-8 cannot absorb). Override with --seed at your own risk.
    "seed": 32,
    "ablation": None,       # None = sweep all configurations
    "node_init": None,
    "break_gradient": False,
    "blend_alpha": 0.5,
}


def gradcheck_sentence(n):
    """Fixed n-token fixture with one triplet for the gradient check."""
    words = ["the", "pizza", "was", "really", "tasty", "and", "fresh", "too"]
    pos = ["DET", "NOUN", "AUX", "ADV", "ADJ", "CCONJ", "ADJ", "ADV"]
    if not 2 <= n <= len(words):
        raise SynGenError(f"gradcheck fixture supports n in 2..{len(words)}")
    deps = [[0, 2]] + [[2, i] for i in range(1, n + 1) if i != 2]
    opinion = min(5, n)
    return parse_sentence({
        "tokens": words[:n],
        "pos": pos[:n],
        "deps": deps,
        "triplets": [{"aspect": [2, 2], "opinion": [opinion, opinion],
                      "polarity": "positive"}],
    }, sentence_id="gradcheck")


def cmd_gradcheck(args):
    cfg = _resolve(GRADCHECK_DEFAULTS, args)
    if cfg["seed"] is None:
        cfg["seed"] = _env_seed()
    _log_resolved("gradcheck", cfg)
    if cfg["ablation"] or cfg["node_init"]:
        configs = [(cfg["ablation"] or "full", cfg["node_init"] or "pos_only")]
    else:
        configs = GRADCHECK_CONFIGS
    sentence = gradcheck_sentence(cfg["n"])
    space = CandidateIndexSpace(sentence.n)
    from .data import linearize_targets

    target = linearize_targets(sentence, SubtaskKind.TRIPLET, space)
    if cfg["break_gradient"]:
        ag.set_gradient_corruption(1.02)
    worst = (0.0, "", "")
    try:
        for ablation, node_init in configs:
            vocab_sentences = [sentence]
            from .data import Vocabulary

            vocab = Vocabulary.build(vocab_sentences)
            model_cfg = ModelConfig(
                d=cfg["d"], enc_layers=cfg["enc_layers"], dec_layers=cfg["dec_layers"],
                heads=cfg["heads"], blend_alpha=cfg["blend_alpha"],
                node_init=node_init, ablation=ablation,
                max_positions=max(16, cfg["n"] + 2),
                dec_max_positions=16,
            )
            model = SynGenModel(vocab, model_cfg, seed=cfg["seed"])
            started = time.perf_counter()
            report = finite_diff_report(
                lambda: model.teacher_forced_loss(sentence, target),
                model.params,
                epsilon=cfg["epsilon"],
            )
            elapsed = time.perf_counter() - started
            print(
                f"[gradcheck] ablation={ablation} node_init={node_init} "
                f"max_rel_err={report.max_rel_error:.3e} "
                f"worst={report.worst_param} ({elapsed:.1f}s)"
            )
            if report.max_rel_error > worst[0]:
                worst = (report.max_rel_error, report.worst_param,
                         f"{ablation}/{node_init}")
    finally:
        ag.set_gradient_corruption(1.0)
    ok = worst[0] < cfg["threshold"]
    print(
        f"[gradcheck] overall max_rel_err={worst[0]:.3e} "
        f"worst={worst[1]} config={worst[2]} threshold={cfg['threshold']:g} "
        f"-> {'OK' if ok else 'FAIL'}"
    )
    return EXIT_OK if ok else EXIT_GRADCHECK


# ---------------------------------------------------------------------------
# analyze-attention

ATTN_DEFAULTS = {
    "ours": None,
    "baseline": None,
    "data": None,
    "out": "runs/attention",
    "layer": -1,
    "seed": None,
}


def cmd_analyze_attention(args):
    cfg = _resolve(ATTN_DEFAULTS, args)
    if not (cfg["ours"] and cfg["baseline"] and cfg["data"]):
        raise UsageError("analyze-attention requires --ours, --baseline and --data")
    ours_model = SynGenModel.load(cfg["ours"])
    base_model = SynGenModel.load(cfg["baseline"])
    if ours_model.vocab.to_list() != base_model.vocab.to_list():
        raise IncompatibilityError("checkpoints were trained over different vocabularies")
    dataset = parse_dataset(cfg["data"])
    out_dir = Path(cfg["out"])
    _write_resolved(out_dir, "analyze-attention", cfg)

    examples = []
    skipped = 0
    for i, sentence in enumerate(dataset):
        ours = attention_extract(ours_model, sentence, layer=cfg["layer"])
        base = attention_extract(base_model, sentence, layer=cfg["layer"])
        labels = position_labels(sentence)
        stem = f"{i:04d}_{sentence.sentence_id}" if sentence.sentence_id else f"{i:04d}"
        write_attention_csv(out_dir / f"{stem}_ours.csv", ours, labels)
        write_attention_csv(out_dir / f"{stem}_baseline.csv", base, labels)
        write_attention_csv(out_dir / f"{stem}_diff.csv", ours - base, labels)
        write_heatmap_dat(out_dir / f"{stem}_diff.dat", ours - base)
        pairs = [(t.aspect, t.opinion) for t in sentence.gold if t.opinion is not None]
        if not pairs:
            skipped += 1
            continue
        examples.append((ours, base, pairs, sentence.n, sentence.sentence_id))
    report = attention_gap(examples)
    write_gap_csv(out_dir / "gaps.csv", report)
    payload = {**report.to_dict(), "skipped_sentences": skipped}
    (out_dir / "gaps.json").write_text(
        json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth / ablate

SYNTH_DEFAULTS = {"n": 8, "seed": None, "out": "synth.jsonl"}


def cmd_synth(args):
    cfg = _resolve(SYNTH_DEFAULTS, args)
    if cfg["seed"] is None:
        cfg["seed"] = _env_seed()
    _log_resolved("synth", cfg)
    if cfg["n"] < 1:
        raise UsageError("--n must be >= 1")
    objects = generate_dataset(cfg["n"], cfg["seed"])
    write_jsonl(cfg["out"], objects)
    print(f"[syngen] wrote {len(objects)} sentences -> {cfg['out']}", file=sys.stderr)
    return EXIT_OK


ABLATE_DEFAULTS = dict(TRAIN_DEFAULTS, out="runs/ablate")


def cmd_ablate(args):
    """Train and self-evaluate every ablation variant on one dataset."""
    cfg = _resolve(ABLATE_DEFAULTS, args)
    if cfg["seed"] is None:
        cfg["seed"] = _env_seed()
    if not cfg["data"]:
        raise UsageError("ablate requires --data")
    out_dir = Path(cfg["out"])
    _write_resolved(out_dir, "ablate", cfg)
    dataset = parse_dataset(cfg["data"])
    kind = SubtaskKind(cfg["task"])
    rows = []
    from .encoder import ABLATION_NAMES

    for ablation in ABLATION_NAMES:
        variant = dict(cfg, ablation=ablation)
        train_cfg = TrainConfig(
            subtask=kind,
            epochs=cfg["epochs"],
            batch_size=cfg["batch_size"],
            lr_gat=cfg["lr_gat"],
            lr_other=cfg["lr_other"],
            gat_lr_x10=cfg["gat_lr_x10"],
            seed=cfg["seed"],
            clip_norm=None if cfg["no_clip"] else cfg["clip_norm"],
            model=_model_config(variant),
        )
        model, _ = train(dataset, train_cfg)
        model.save(out_dir / f"checkpoint_{ablation}.json")
        report, _ = evaluate_dataset(model, dataset, kind, beam_width=cfg["beam"])
        rows.append((ablation, report))
        print(f"[ablate] {ablation}: f1={report.f1:.4f}", file=sys.stderr)
    with open(out_dir / "ablation_results.csv", "w", encoding="utf-8") as fh:
        fh.write("ablation,precision,recall,f1\n")
        for ablation, report in rows:
            fh.write(f"{ablation},{report.precision!r},{report.recall!r},{report.f1!r}\n")
    print(json.dumps({a: r.f1 for a, r in rows}, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser plumbing


class UsageError(SynGenError):
    pass


def _add_common(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON file of resolved options")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="syngen",
        description="Train, evaluate and analyze the dual-channel pointer model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--data")
    p.add_argument("--dev")
    p.add_argument("--out")
    p.add_argument("--task", choices=[k.value for k in SubtaskKind])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--enc-layers", dest="enc_layers", type=int)
    p.add_argument("--dec-layers", dest="dec_layers", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--blend-alpha", dest="blend_alpha", type=float)
    p.add_argument("--node-init", dest="node_init",
                   choices=["pos_only", "token_only", "pos_plus_token"])
    p.add_argument("--ablation",
                   choices=["full", "no_graph", "no_gate", "no_graph_no_gate"])
    p.add_argument("--lr-gat", dest="lr_gat", type=float)
    p.add_argument("--lr-other", dest="lr_other", type=float)
    p.add_argument("--gat-lr-x10", dest="gat_lr_x10", action="store_true", default=None)
    p.add_argument("--clip-norm", dest="clip_norm", type=float)
    p.add_argument("--no-clip", dest="no_clip", action="store_true", default=None)
    p.add_argument("--eval-every", dest="eval_every", type=int)
    p.add_argument("--beam", type=int)
    p.add_argument("--max-positions", dest="max_positions", type=int)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    for name, func, help_text in (
        ("evaluate", cmd_evaluate, "score a checkpoint on a dataset"),
        ("decode", cmd_decode, "decode a dataset to JSON lines"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--checkpoint")
        p.add_argument("--data")
        p.add_argument("--task", choices=[k.value for k in SubtaskKind])
        p.add_argument("--beam", type=int)
        p.add_argument("--max-steps", dest="max_steps", type=int)
        p.add_argument("--constrained", action="store_true", default=None)
        p.add_argument("--out")
        _add_common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--enc-layers", dest="enc_layers", type=int)
    p.add_argument("--dec-layers", dest="dec_layers", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--blend-alpha", dest="blend_alpha", type=float)
    p.add_argument("--ablation",
                   choices=["full", "no_graph", "no_gate", "no_graph_no_gate"])
    p.add_argument("--node-init", dest="node_init",
                   choices=["pos_only", "token_only", "pos_plus_token"])
    p.add_argument("--break-gradient", dest="break_gradient", action="store_true",
                   default=None, help="negative control: corrupt one backward rule")
    _add_common(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("analyze-attention",
                       help="attention maps and gap metrics for two checkpoints")
    p.add_argument("--ours")
    p.add_argument("--baseline")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--layer", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_analyze_attention)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--n", type=int)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ablate", help="train and score all ablation variants")
    for flag in ("--data", "--out"):
        p.add_argument(flag)
    p.add_argument("--task", choices=[k.value for k in SubtaskKind])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--beam", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with code 2
    except DivergedTrainingError as exc:
        print(f"[syngen] training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except SynGenError as exc:
        print(f"[syngen] error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
