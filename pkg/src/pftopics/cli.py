"""Command-line interface: ``pftopics {prep,train,eval,topics,predict,simulate,verify}``.

Machine-readable results go to stdout as JSON; human-readable reports go to
stderr or to files. Exit codes: 0 success, 1 domain error, 2 usage error.

Every option can also come from a JSON file passed with ``--config``; its
keys are the option names in snake_case. Flags given on the command line
win over the file.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (
    Corpus,
    CorpusError,
    load_corpus,
    load_documents,
    load_stoplist,
    load_vocabulary,
    prune_vocabulary,
    remove_stopwords,
    split_corpus,
    write_documents,
    write_vocabulary,
)
from .evaluation import Metrics, auc, coherence, relevant_fraction, rmse, topic_report
from .inference import TrainingDivergedError, TrainOptions, predict_corpus, train
from .model import ModelConfig, TrainedModel, load_model, sample_corpus, save_model

logger = logging.getLogger("pftopics")

DEFAULTS = {
    # prep
    "stoplist": None,
    "min_docs": 10,
    "max_doc_frac": 0.5,
    "fractions": "0.75,0.125,0.125",
    "out_dir": None,
    # model / training
    "vocab": None,
    "docs": None,
    "val_docs": None,
    "K": 10,
    "p": 0.2,
    "alpha": None,
    "target_kind": None,
    "epochs": 500,
    "learning_rate": 0.025,
    "batch_size": None,
    "seed": 0,
    "convergence_tol": 1e-5,
    "gamma_floor": 1e-3,
    "val_every": 10,
    "model_out": "model.json",
    "log_out": None,
    "sweep_p": None,
    # evaluation
    "model": None,
    "reference": None,
    "top_n": 50,
    "npmi": False,
    "topics": None,
    "report_out": None,
    "out": None,
    # simulate / verify
    "truth": None,
    "num_docs": 500,
    "tokens_per_doc": 60,
    "instances": 100,
    "quadrature_points": 200,
    "instance": None,
    "disjoint": False,
    "threads": None,
}


class CLIError(Exception):
    """A domain error reported with exit code 1."""


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def _floats(text, name: str) -> list[float]:
    if text is None:
        return None
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise CLIError(f"--{name.replace('_', '-')}: expected comma-separated numbers, got {text!r}") from None


def _require(cfg: dict, *names: str) -> None:
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        raise CLIError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _require_file(path, what: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise CLIError(f"{what} not found: {path}")
    return path


# ---------------------------------------------------------------------------
# subcommands


def cmd_prep(cfg: dict) -> int:
    _require(cfg, "vocab", "docs", "out_dir")
    _require_file(cfg["vocab"], "vocabulary file")
    _require_file(cfg["docs"], "documents file")
    corpus = load_corpus(cfg["vocab"], cfg["docs"])
    V_in, M_in = corpus.V, len(corpus)
    if cfg.get("stoplist"):
        corpus = remove_stopwords(corpus, load_stoplist(_require_file(cfg["stoplist"], "stop-list file")))
    corpus = prune_vocabulary(corpus, int(cfg["min_docs"]), float(cfg["max_doc_frac"]))
    fractions = _floats(cfg["fractions"], "fractions")
    parts = split_corpus(corpus, fractions, int(cfg["seed"]))
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_vocabulary(corpus.vocabulary, out / "vocab.txt")
    names = ("train", "val", "test")
    for name, part in zip(names, parts):
        write_documents(part, out / f"{name}.tsv")
    manifest = {name: [d.id for d in part.documents] for name, part in zip(names, parts)}
    (out / "splits.json").write_text(json.dumps(manifest) + "\n", encoding="utf-8")
    _emit(
        {
            "V": corpus.V,
            "M": len(corpus),
            "V_input": V_in,
            "M_input": M_in,
            "dropped_docs": M_in - len(corpus),
            "splits": {name: len(part) for name, part in zip(names, parts)},
            "out_dir": str(out),
        }
    )
    return 0


def _train_options(cfg: dict) -> TrainOptions:
    return TrainOptions(
        learning_rate=float(cfg["learning_rate"]),
        epochs=int(cfg["epochs"]),
        batch_size=None if cfg["batch_size"] is None else int(cfg["batch_size"]),
        seed=int(cfg["seed"]),
        convergence_tol=float(cfg["convergence_tol"]),
        gamma_floor=float(cfg["gamma_floor"]),
        val_every=int(cfg["val_every"]),
    )


def _model_config(cfg: dict, corpus: Corpus, p: float) -> ModelConfig:
    K = int(cfg["K"])
    alpha = _floats(cfg["alpha"], "alpha")
    if alpha is not None and len(alpha) == 1:
        alpha = alpha * K
    kind = cfg["target_kind"] or corpus.target_kind
    if kind == "none":
        raise CLIError("training documents carry no targets")
    return ModelConfig(K=K, p=p, alpha=None if alpha is None else tuple(alpha), target_kind=kind, seed=int(cfg["seed"]))


def _suffixed(path: Path, p: float) -> Path:
    return path.with_name(f"{path.stem}_p{p:g}{path.suffix}")


def _train_once(cfg, corpus, validation, p, model_path: Path, log_path: Path | None) -> dict:
    config = _model_config(cfg, corpus, p)
    opts = _train_options(cfg)
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:

        def log_record(rec):
            if log_fh:
                log_fh.write(json.dumps(rec.to_dict()) + "\n")

        result = train(corpus, config, opts, validation, callback=log_record)
    finally:
        if log_fh:
            log_fh.close()
    model = TrainedModel(corpus.vocabulary, config, result.params, result.varphi)
    model_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, model_path)
    last = result.history[-1]
    return {
        "p": p,
        "elbo": last.elbo,
        "val_metric": last.val_metric,
        "relevant_fraction": last.relevant_fraction,
        "epochs": last.epoch,
        "converged": result.converged,
        "t_xi_prior": last.elbo_terms["t_xi_prior"],
        "model": str(model_path),
        "_params": result.params,
    }


def cmd_train(cfg: dict) -> int:
    _require(cfg, "vocab", "docs")
    vocab = load_vocabulary(_require_file(cfg["vocab"], "vocabulary file"))
    corpus = load_documents(_require_file(cfg["docs"], "documents file"), vocab, cfg["target_kind"])
    validation = None
    if cfg.get("val_docs"):
        validation = load_documents(_require_file(cfg["val_docs"], "validation documents file"), vocab, corpus.target_kind)
    model_path = Path(cfg["model_out"])
    log_path = Path(cfg["log_out"]) if cfg.get("log_out") else None
    sweep = _floats(cfg.get("sweep_p"), "sweep_p")
    if not sweep:
        run = _train_once(cfg, corpus, validation, float(cfg["p"]), model_path, log_path)
        run.pop("_params")
        _emit(run)
        return 0
    rows = []
    for p in sweep:
        run = _train_once(
            cfg, corpus, validation, p, _suffixed(model_path, p), _suffixed(log_path, p) if log_path else None
        )
        params = run.pop("_params")
        rows.append(
            {
                "p": p,
                "coherence": coherence(params.beta, corpus, int(cfg["top_n"]), bool(cfg["npmi"])),
                "metric": run["val_metric"],
                "relevant_fraction": run["relevant_fraction"],
                "elbo": run["elbo"],
                "model": run["model"],
            }
        )
    _emit({"sweep": rows})
    return 0


def _eval_corpus(model: TrainedModel, cfg: dict, key: str = "docs") -> Corpus:
    if cfg.get("vocab"):
        vocab = load_vocabulary(_require_file(cfg["vocab"], "vocabulary file"))
        if vocab.terms != model.vocabulary.terms:
            raise CLIError("vocabulary mismatch between model and corpus")
    path = _require_file(cfg[key], "documents file")
    try:
        return load_documents(path, model.vocabulary)
    except CorpusError as exc:
        raise CLIError(f"corpus does not match the model vocabulary: {exc}") from exc


def _report(model: TrainedModel, cfg: dict, n: int) -> dict:
    report = topic_report(model.params, model.varphi, model.vocabulary, min(n, model.params.V))
    text = report.to_text()
    if cfg.get("report_out"):
        Path(cfg["report_out"]).write_text(text, encoding="utf-8")
    else:
        sys.stderr.write(text)
    return report.to_dict()


def cmd_eval(cfg: dict) -> int:
    _require(cfg, "model", "docs")
    model = load_model(_require_file(cfg["model"], "model file"))
    corpus = _eval_corpus(model, cfg)
    reference = corpus
    if cfg.get("reference"):
        reference = _eval_corpus(model, cfg, "reference")
    opts = _train_options(cfg)
    preds = None
    out = Metrics(
        coherence=coherence(model.params.beta, reference, int(cfg["top_n"]), bool(cfg["npmi"])),
        relevant_fraction=relevant_fraction(model.varphi),
    )
    if corpus.target_kind != "none":
        preds = predict_corpus(corpus, model.params, model.config, model.varphi, opts)
        if model.config.target_kind == "binary":
            try:
                out.auc = auc(preds, corpus.targets)
            except ValueError as exc:
                raise CLIError(f"AUC undefined on this split: {exc}") from exc
        else:
            out.rmse = rmse(preds, corpus.targets)
    result = out.to_dict()
    if cfg.get("topics"):
        result["topics"] = _report(model, cfg, int(cfg["topics"]))
    _emit(result)
    return 0


def cmd_topics(cfg: dict) -> int:
    _require(cfg, "model")
    if cfg.get("docs"):
        cfg = dict(cfg, topics=cfg.get("topics") or 10)
        return cmd_eval(cfg)
    model = load_model(_require_file(cfg["model"], "model file"))
    _emit(_report(model, cfg, int(cfg.get("topics") or 10)))
    return 0


def cmd_predict(cfg: dict) -> int:
    _require(cfg, "model", "docs")
    model = load_model(_require_file(cfg["model"], "model file"))
    corpus = _eval_corpus(model, cfg)
    preds = predict_corpus(corpus, model.params, model.config, model.varphi, _train_options(cfg))
    lines = "".join(json.dumps({"id": d.id, "prediction": float(y)}) + "\n" for d, y in zip(corpus.documents, preds))
    if cfg.get("out"):
        Path(cfg["out"]).write_text(lines, encoding="utf-8")
    else:
        sys.stdout.write(lines)
    return 0


def cmd_simulate(cfg: dict) -> int:
    _require(cfg, "truth", "out_dir")
    truth = load_model(_require_file(cfg["truth"], "ground-truth parameter file"))
    config = truth.config
    if cfg.get("p") is not None and cfg.get("_p_explicit"):
        config = ModelConfig(config.K, float(cfg["p"]), config.alpha, config.target_kind, config.seed)
    corpus, latents = sample_corpus(
        config, truth.params, int(cfg["num_docs"]), int(cfg["tokens_per_doc"]), int(cfg["seed"]), truth.vocabulary
    )
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_vocabulary(corpus.vocabulary, out / "vocab.txt")
    write_documents(corpus, out / "docs.tsv")
    with open(out / "latents.jsonl", "w", encoding="utf-8") as fh:
        for doc, lat in zip(corpus.documents, latents):
            rec = {
                "id": doc.id,
                "theta": lat.theta.tolist(),
                "z": lat.z.tolist(),
                "xi": lat.xi.tolist(),
                "words": lat.words.tolist(),
            }
            fh.write(json.dumps(rec) + "\n")
    xi = np.concatenate([lat.xi for lat in latents]) if latents else np.zeros(0)
    _emit(
        {
            "docs": len(corpus),
            "V": corpus.V,
            "p": config.p,
            "relevant_token_fraction": float(xi.mean()) if xi.size else None,
            "out_dir": str(out),
        }
    )
    return 0


def _instance_from_json(path) -> "TinyInstance":
    from .corpus import Document
    from .model import ModelParams
    from .oracle import TinyInstance

    data = json.loads(Path(path).read_text(encoding="utf-8"))
    beta = np.asarray(data["beta"], dtype=float)
    K = beta.shape[0]
    config = ModelConfig(
        K=K, p=data["p"], alpha=tuple(data.get("alpha", [1.0] * K)), target_kind=data.get("target_kind", "real")
    )
    params = ModelParams(beta, data["pi"], data.get("eta", [0.0] * K), data.get("delta", 1.0))
    doc = Document("instance", {int(k): int(v) for k, v in data["doc"].items()})
    try:
        return TinyInstance(config, params, doc, data.get("target"))
    except ValueError as exc:
        raise CLIError(f"enumeration bounds exceeded: {exc}") from exc


def cmd_verify(cfg: dict) -> int:
    from . import verification

    if cfg.get("instance"):
        inst = _instance_from_json(_require_file(cfg["instance"], "instance file"))
        summary = verification.check_instance(inst, int(cfg["quadrature_points"]), seed=int(cfg["seed"]))
    elif cfg.get("disjoint"):
        summary = {"switches_disjoint": verification.disjoint_suite(int(cfg["instances"]), int(cfg["seed"]))}
    else:
        summary = verification.full_suite(int(cfg["instances"]), int(cfg["seed"]), int(cfg["quadrature_points"]))
    _emit(summary)
    for key, section in summary.items():
        if isinstance(section, dict) and "passed" in section and "total" in section:
            sys.stderr.write(f"{key}: {section['passed']}/{section['total']} passed\n")
    return 0 if verification.all_passed(summary) else 1


COMMANDS = {
    "prep": cmd_prep,
    "train": cmd_train,
    "eval": cmd_eval,
    "topics": cmd_topics,
    "predict": cmd_predict,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# argument parsing


def _add(parser, name, **kw):
    parser.add_argument("--" + name.replace("_", "-"), dest=name, default=None, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pftopics", description="Prediction-focused supervised topic models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    _add(common, "config", help="JSON file with option values")
    _add(common, "threads", type=int, help="cap on worker threads (also PFTOPICS_THREADS)")
    _add(common, "seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    training = argparse.ArgumentParser(add_help=False)
    _add(training, "K", type=int, help="number of relevant topics")
    _add(training, "p", type=float, help="switch prior; 1 gives plain sLDA")
    _add(training, "alpha", help="Dirichlet prior, one value or K comma-separated values")
    _add(training, "target_kind", choices=("real", "binary"))
    _add(training, "epochs", type=int)
    _add(training, "learning_rate", type=float)
    _add(training, "batch_size", type=int)
    _add(training, "convergence_tol", type=float)
    _add(training, "gamma_floor", type=float)
    _add(training, "val_every", type=int)

    coh = argparse.ArgumentParser(add_help=False)
    _add(coh, "top_n", type=int, help="top words per topic for coherence (default 50)")
    coh.add_argument("--npmi", dest="npmi", action="store_const", const=True, default=None)

    p = sub.add_parser("prep", parents=[common], help="prune and split a corpus")
    for name in ("vocab", "docs", "stoplist", "out_dir"):
        _add(p, name)
    _add(p, "min_docs", type=int)
    _add(p, "max_doc_frac", type=float)
    _add(p, "fractions", help="train,val,test fractions")

    p = sub.add_parser("train", parents=[common, training, coh], help="train a model")
    for name in ("vocab", "docs", "val_docs", "model_out", "log_out"):
        _add(p, name)
    _add(p, "sweep_p", help="comma-separated p values; trains one model per value")

    p = sub.add_parser("eval", parents=[common, coh], help="evaluate a model on a split")
    for name in ("model", "docs", "vocab", "reference", "report_out"):
        _add(p, name)
    _add(p, "topics", type=int, help="also print a topic report with this many words per topic")

    p = sub.add_parser("topics", parents=[common, coh], help="topic report (eval --topics)")
    for name in ("model", "docs", "vocab", "reference", "report_out"):
        _add(p, name)
    _add(p, "topics", type=int)

    p = sub.add_parser("predict", parents=[common], help="predict targets for documents")
    for name in ("model", "docs", "vocab", "out"):
        _add(p, name)

    p = sub.add_parser("simulate", parents=[common], help="sample a synthetic corpus")
    for name in ("truth", "out_dir"):
        _add(p, name)
    _add(p, "p", type=float)
    _add(p, "num_docs", type=int)
    _add(p, "tokens_per_doc", type=int)

    p = sub.add_parser("verify", parents=[common], help="run the exact-likelihood oracle checks")
    _add(p, "instances", type=int)
    _add(p, "quadrature_points", type=int)
    _add(p, "instance", help="JSON file describing a single tiny instance")
    p.add_argument("--disjoint", dest="disjoint", action="store_const", const=True, default=None)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    explicit = {k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config", "verbose")}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise CLIError(f"config file not found: {path}")
        file_cfg = json.loads(path.read_text(encoding="utf-8"))
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise CLIError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(file_cfg)
        if "p" in file_cfg:
            cfg["_p_explicit"] = True
    cfg.update(explicit)
    if "p" in explicit:
        cfg["_p_explicit"] = True
    if cfg.get("threads") is None and os.environ.get("PFTOPICS_THREADS"):
        cfg["threads"] = int(os.environ["PFTOPICS_THREADS"])
    return cfg


def _thread_limit(n):
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        with _thread_limit(cfg.get("threads")):
            return COMMANDS[args.command](cfg)
    except TrainingDivergedError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (CLIError, CorpusError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
