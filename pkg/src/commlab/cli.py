"""``commlab`` command line.

Every subcommand resolves its parameters as flags > JSON config > defaults
and writes a run manifest next to its outputs.  A manifest is itself a valid
``--config`` file, so ``commlab <command> --config run.manifest.json``
repeats a run.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__
from ._random import fresh_seed
from .errors import CommlabError, GuardError

log = logging.getLogger("commlab")


@dataclass(frozen=True)
class Opt:
    name: str
    type: Any = str
    default: Any = None
    help: str = ""
    choices: tuple = None
    flag: bool = False  # store_true
    nargs: str = None
    positional: bool = False


def _graph_opts():
    return [
        Opt("graph", str, None, "prefix of <prefix>.edges.txt / .communities.txt / .labels.txt"),
        Opt("edges", str, None, "edge-list file (overrides --graph)"),
        Opt("communities", str, None, "community file (overrides --graph)"),
        Opt("labels", str, None, "label table fixing node order (overrides --graph)"),
    ]


def _embedding_source_opts():
    return [
        Opt("embedding", str, None, "embedding file; if absent the block construction is used"),
        Opt("n", int, 1024, "construction: node count"),
        Opt("b", int, 16, "construction: block size"),
        Opt("c", float, 8.0, "construction: dimension constant, d = ceil(c ln n)"),
        Opt("construct_seed", int, 0, "construction: seed"),
    ]


SPECS = {
    "gen-sbm": [
        Opt("n", int, 10_000, "node count"),
        Opt("block_size", int, 20, "block size (must divide n)"),
        Opt("p_intra", float, None, "intra-block edge probability"),
        Opt("avg_degree", float, None, "pick p_intra for this expected degree (balanced q)"),
        Opt("q_inter", float, None, "inter-block edge probability"),
        Opt("balanced", bool, False, "set q so that inside and outside degrees match", flag=True),
        Opt("seed", int, None, "random seed"),
        Opt("edge_budget", int, 50_000_000, "refuse graphs with more expected edges"),
        Opt("out_prefix", str, "sbm", "output prefix"),
    ],
    "ingest": [
        Opt("edges", str, None, "SNAP edge list"),
        Opt("communities", str, None, "SNAP community file"),
        Opt("strict", bool, False, "reject unknown or isolated community members", flag=True),
        Opt("dataset", str, None, "check counts against a known dataset", choices=("dblp", "amazon")),
        Opt("out_prefix", str, "graph", "output prefix"),
    ],
    "embed": _graph_opts() + [
        Opt("method", str, "netmf", "embedding method",
            choices=("netmf", "deepwalk", "node2vec", "grarep", "softmax-exact")),
        Opt("dim", int, 128, "embedding dimension"),
        Opt("window", int, None, "window / number of walk steps K (netmf 2, others 5)"),
        Opt("negatives", int, None, "negative samples (netmf 1, sgns 5)"),
        Opt("walks_per_node", int, 10, "walks per node"),
        Opt("walk_length", int, 40, "walk length"),
        Opt("epochs", int, 5, "SGNS epochs"),
        Opt("step_size", float, None, "initial SGNS rate (0.025) or softmax step (0.5)"),
        Opt("steps", int, 500, "softmax-exact iterations"),
        Opt("p", float, None, "node2vec return parameter (0.5; deepwalk 1)"),
        Opt("q", float, None, "node2vec in-out parameter (0.5; deepwalk 1)"),
        Opt("isolated", str, "zero", "walk-matrix policy for degree-0 nodes", choices=("zero", "error")),
        Opt("dense_guard", int, 20_000, "node-count guard for dense matrices"),
        Opt("seed", int, None, "random seed"),
        Opt("dump_walks", str, None, "also write the walk corpus here"),
        Opt("out", str, "embedding.txt", "embedding output file"),
    ],
    "baseline-train": _graph_opts() + [
        Opt("anchors", int, 50, "training anchors"),
        Opt("min_comm_size", int, 20, "anchors come from communities at least this large"),
        Opt("alpha", float, 0.15, "PPR teleport probability"),
        Opt("r_max", float, 1e-5, "PPR push threshold"),
        Opt("l2", float, 1e-4, "L2 strength"),
        Opt("max_iters", int, 10_000, "optimizer iteration cap"),
        Opt("tol", float, 1e-8, "gradient-norm tolerance"),
        Opt("seed", int, None, "random seed"),
        Opt("dump_features", str, None, "also write training pair features as CSV"),
        Opt("out", str, "model.json", "model output file"),
    ],
    "evaluate": _graph_opts() + [
        Opt("scorer", str, "structural-lr", "pair scorer", choices=("dot", "hadamard-lr", "structural-lr")),
        Opt("embedding", str, None, "embedding file (dot, hadamard-lr)"),
        Opt("model", str, None, "trained structural model (else trained here)"),
        Opt("method_name", str, None, "name in the report (defaults to scorer or embedding method)"),
        Opt("graph_name", str, None, "dataset name for report tables"),
        Opt("k", int, 10, "precision cutoff"),
        Opt("samples", int, 1000, "sampled vertices"),
        Opt("min_k", int, None, "minimum same-community partners (default k)"),
        Opt("anchors", int, 50, "training anchors when training here"),
        Opt("min_comm_size", int, 20, "anchor community size"),
        Opt("alpha", float, 0.15, "PPR teleport probability"),
        Opt("r_max", float, 1e-5, "PPR push threshold"),
        Opt("l2", float, 1e-4, "L2 strength"),
        Opt("seed", int, None, "seed for vertex sampling"),
        Opt("train_seed", int, None, "seed for anchor sampling (default seed + 1)"),
        Opt("workers", int, 1, "threads for ranking"),
        Opt("curve_csv", str, None, "also write the reliability curve as CSV"),
        Opt("out", str, "report.json", "EvalReport JSON output"),
    ],
    "theory gram-bound": [
        Opt("embedding", str, None, "check one embedding file instead of the random campaign"),
        Opt("epsilons", float, None, "epsilon grid (default 0.05 0.1 0.2)", nargs="+"),
        Opt("instances", int, 10_000, "random instances"),
        Opt("max_n", int, 64, "largest n in the campaign"),
        Opt("max_d", int, 8, "largest d in the campaign"),
        Opt("seed", int, None, "random seed"),
        Opt("out", str, "gram-bound.json", "JSON report"),
    ],
    "theory construct": _embedding_source_opts()[1:] + [
        Opt("out_prefix", str, "construction", "writes <prefix>.embedding.txt and <prefix>.json"),
    ],
    "theory perturb-sweep": _embedding_source_opts() + [
        Opt("epsilon", float, None, "community-pair threshold (default 1/(2b))"),
        Opt("deltas", float, None, "noise scales (default 0 0.001 0.01 0.05 0.1 0.2)", nargs="+"),
        Opt("trials", int, 20, "perturbations per delta"),
        Opt("seed", int, None, "perturbation seed"),
        Opt("workers", int, 1, "threads over trials"),
        Opt("out_prefix", str, "sweep", "writes .json, .csv and .svg"),
    ],
    "theory lengths": _embedding_source_opts() + [
        Opt("epsilon", float, None, "community-pair threshold (default 1/(2b))"),
        Opt("out", str, "lengths.json", "JSON report"),
    ],
    "plot": [
        Opt("reports", str, None, "EvalReport JSON files", positional=True),
        Opt("title", str, "", "chart title"),
        Opt("out", str, "curves.svg", "SVG output"),
    ],
    "report": [
        Opt("reports", str, None, "EvalReport JSON files", positional=True),
        Opt("out", str, "precision.csv", "CSV output"),
    ],
}

RANDOMIZED = {"gen-sbm", "embed", "baseline-train", "evaluate", "theory gram-bound", "theory perturb-sweep"}


# -- parsing ------------------------------------------------------------------


def _add_opts(parser, opts):
    for o in opts:
        if o.positional:
            parser.add_argument(o.name, nargs="*", default=argparse.SUPPRESS, help=o.help, metavar=o.name.upper())
            continue
        flag = "--" + o.name.replace("_", "-")
        kw = {"default": argparse.SUPPRESS, "help": o.help, "dest": o.name}
        if o.flag:
            parser.add_argument(flag, action="store_true", **kw)
            continue
        kw["type"] = o.type
        if o.choices:
            kw["choices"] = o.choices
        if o.nargs:
            kw["nargs"] = o.nargs
        parser.add_argument(flag, **kw)
    parser.add_argument("--config", default=None, help="JSON config or manifest; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="commlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"commlab {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    theory = None
    for name, opts in SPECS.items():
        if name.startswith("theory "):
            if theory is None:
                tp = sub.add_parser("theory", help="bounds and constructions for factorizations")
                theory = tp.add_subparsers(dest="theory_command", required=True, metavar="EXPERIMENT")
            p = theory.add_parser(name.split()[1])
        else:
            p = sub.add_parser(name)
        _add_opts(p, opts)
    return parser


def _load_config(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise CommlabError(f"config {path} is not a JSON object")
    # a manifest carries its parameters under "params"
    return dict(data.get("params", data))


def resolve(command, ns) -> tuple[dict, dict]:
    """Merge defaults, config file and flags; also say where each value came from."""
    opts = SPECS[command]
    known = {o.name for o in opts}
    params = {o.name: o.default for o in opts}
    sources = {o.name: "default" for o in opts}
    if ns.config:
        config = _load_config(ns.config)
        unknown = sorted(set(config) - known)
        if unknown:
            log.warning("ignoring config keys not used by %s: %s", command, ", ".join(unknown))
        for k in known & set(config):
            params[k] = config[k]
            sources[k] = "config"
    for k in known:
        if hasattr(ns, k) and getattr(ns, k) != []:
            params[k] = getattr(ns, k)
            sources[k] = "flag"
    if command in RANDOMIZED and params.get("seed") is None:
        params["seed"] = fresh_seed()
        sources["seed"] = "generated"
    return params, sources


# -- run bookkeeping ----------------------------------------------------------


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _versions() -> dict:
    import numba
    import scipy

    return {"commlab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


@dataclass
class RunManifest:
    command: str
    params: dict
    sources: dict
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    versions: dict = field(default_factory=_versions)
    timings: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def input(self, path):
        self.inputs[path] = file_digest(path)
        return path

    def output(self, path):
        self.outputs[path] = None
        return path

    def timed(self, label):
        return _Timer(self.timings, label)

    def write(self, path) -> None:
        for p in self.outputs:
            self.outputs[p] = file_digest(p)
        with open(path, "w") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


class _Timer:
    def __init__(self, sink, label):
        self.sink, self.label = sink, label

    def __enter__(self):
        self.t = time.perf_counter()

    def __exit__(self, *exc):
        self.sink[self.label] = round(time.perf_counter() - self.t, 6)


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _dump_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _manifest_path(out) -> str:
    stem = out[:-5] if out.endswith(".json") else out
    return stem + ".manifest.json"


# -- shared loaders -----------------------------------------------------------


def _graph_paths(p) -> tuple:
    prefix = p.get("graph")
    edges = p.get("edges") or (prefix and f"{prefix}.edges.txt")
    comms = p.get("communities") or (prefix and f"{prefix}.communities.txt")
    labels = p.get("labels") or (prefix and f"{prefix}.labels.txt")
    if not edges:
        raise CommlabError("give --graph PREFIX or --edges FILE")
    if labels and not os.path.exists(labels):
        labels = None
    return edges, comms, labels


def load_graph(p, run: RunManifest, need_communities=True):
    from .graph import load_communities, load_edge_list, read_labels, with_label_order

    edges, comms, labels = _graph_paths(p)
    with open(run.input(edges)) as fh:
        g = load_edge_list(fh)
    if labels:
        with open(run.input(labels)) as fh:
            g = with_label_order(g, read_labels(fh))
    cs = None
    if need_communities:
        if not comms:
            raise CommlabError("this command needs a community file (--communities or --graph)")
        with open(run.input(comms)) as fh:
            cs = load_communities(fh, g)
    log.info("graph: %d nodes, %d edges", g.node_count, g.edge_count)
    run.notes["graph_digest"] = g.digest
    return g, cs


def load_aligned_embedding(path, g, run: RunManifest):
    """Read an embedding file and reorder its columns to the graph's ids."""
    from .embed import Embedding, read_embedding

    with open(run.input(path)) as fh:
        e, labels = read_embedding(fh)
    pos = {x: i for i, x in enumerate(labels)}
    missing = [x for x in g.labels if x not in pos]
    if missing:
        raise CommlabError(f"embedding lacks {len(missing)} graph labels, e.g. {missing[0]!r}")
    order = np.array([pos[x] for x in g.labels])
    return Embedding(e.vectors[:, order], e.method, e.params)


def _theory_embedding(p, run: RunManifest):
    from .embed import read_embedding
    from .theory import block_construction

    if p.get("embedding"):
        with open(run.input(p["embedding"])) as fh:
            e, _ = read_embedding(fh)
        return e, None
    e = block_construction(p["n"], p["b"], p["c"], p["construct_seed"])
    run.notes["construction"] = e.params
    return e, p["b"]


def _default_epsilon(p, b):
    if p.get("epsilon") is not None:
        return p["epsilon"]
    if b is None:
        raise CommlabError("--epsilon is required with --embedding")
    return 1.0 / (2 * b)


# -- subcommands --------------------------------------------------------------


def cmd_gen_sbm(p, run):
    from .graph import write_communities, write_edge_list, write_labels
    from .sbm import SbmParams, balanced_q, generate_sbm, p_intra_for_degree

    n, b = p["n"], p["block_size"]
    if (p["p_intra"] is None) == (p["avg_degree"] is None):
        raise CommlabError("give exactly one of --p-intra and --avg-degree")
    p_intra = p["p_intra"] if p["p_intra"] is not None else p_intra_for_degree(p["avg_degree"], b)
    if p["avg_degree"] is not None or p["balanced"]:
        if p["q_inter"] is not None:
            raise CommlabError("--q-inter conflicts with --balanced / --avg-degree")
        q = balanced_q(n, b, p_intra)
    elif p["q_inter"] is not None:
        q = p["q_inter"]
    else:
        raise CommlabError("give --q-inter or --balanced")
    params = SbmParams(n, b, p_intra, q, p["seed"])
    run.notes.update(p_intra=p_intra, q_inter=q, expected_degree=params.expected_degree())
    with run.timed("generate"):
        g, cs = generate_sbm(params, p["edge_budget"])
    prefix = p["out_prefix"]
    with open(run.output(f"{prefix}.edges.txt"), "w") as fh:
        write_edge_list(g, fh)
    with open(run.output(f"{prefix}.communities.txt"), "w") as fh:
        write_communities(cs, g, fh)
    with open(run.output(f"{prefix}.labels.txt"), "w") as fh:
        write_labels(g, fh)
    run.notes.update(nodes=g.node_count, edges=g.edge_count, mean_degree=float(g.degrees.mean()))
    print(f"{g.node_count} nodes, {g.edge_count} edges, mean degree {g.degrees.mean():.3f}")
    return f"{prefix}.manifest.json"


# published SNAP summary counts, compared at the precision they are usually quoted
KNOWN_DATASETS = {
    "dblp": {"nodes": (317, 1e3), "edges": (1, 1e6), "communities": (13, 1e3)},
    "amazon": {"nodes": (334, 1e3), "edges": (1, 1e6), "communities": (75, 1e3)},
}


def community_summary(g, cs) -> dict:
    sizes = cs.sizes
    A = g.adjacency
    dens = []
    for c in cs.communities:
        s = len(c)
        if s >= 2:
            dens.append(A[c][:, c].nnz / (s * (s - 1)))
    return {
        "communities": len(sizes),
        "max_size": int(sizes.max(initial=0)),
        "median_size": float(np.median(sizes)) if len(sizes) else 0.0,
        "mean_density": float(np.mean(dens)) if dens else 0.0,
        "skipped_labels": cs.skipped_labels,
    }


def cmd_ingest(p, run):
    from .graph import load_communities, load_edge_list, write_communities, write_edge_list, write_labels

    if not p["edges"] or not p["communities"]:
        raise CommlabError("ingest needs --edges and --communities")
    with run.timed("load"), open(run.input(p["edges"])) as fh:
        g = load_edge_list(fh)
    with open(run.input(p["communities"])) as fh:
        cs = load_communities(fh, g, strict=p["strict"])
    summary = {"nodes": g.node_count, "edges": g.edge_count, **community_summary(g, cs)}
    status = 0
    if p["dataset"]:
        checks = {}
        for key, (expected, unit) in KNOWN_DATASETS[p["dataset"]].items():
            got = round(summary[key] / unit)
            checks[key] = {"expected": expected, "observed": summary[key], "ok": got == expected}
        summary["checks"] = checks
        if not all(c["ok"] for c in checks.values()):
            log.error("counts disagree with the %s summary: %s", p["dataset"], checks)
            status = 1
    prefix = p["out_prefix"]
    with open(run.output(f"{prefix}.edges.txt"), "w") as fh:
        write_edge_list(g, fh)
    with open(run.output(f"{prefix}.communities.txt"), "w") as fh:
        write_communities(cs, g, fh)
    with open(run.output(f"{prefix}.labels.txt"), "w") as fh:
        write_labels(g, fh)
    _dump_json(run.output(f"{prefix}.summary.json"), summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return f"{prefix}.manifest.json", status


def cmd_embed(p, run):
    from .embed import direct_factorize, grarep, sgns_from_walks, softmax_factorize, write_embedding
    from .proximity import netmf_transform, sample_walks, walk_matrix_sum

    g, _ = load_graph(p, run, need_communities=False)
    method, d, seed = p["method"], p["dim"], p["seed"]
    resolved = dict(p)
    walk_method = method in ("deepwalk", "node2vec")
    resolved["window"] = p["window"] or (2 if method == "netmf" else 5)
    resolved["negatives"] = p["negatives"] or (1 if method == "netmf" else 5)
    resolved["step_size"] = p["step_size"] or (0.025 if walk_method else 0.5)
    dflt = 0.5 if method == "node2vec" else 1.0
    resolved["p"] = p["p"] if p["p"] is not None else dflt
    resolved["q"] = p["q"] if p["q"] is not None else dflt
    run.notes["resolved"] = resolved
    K = resolved["window"]
    with run.timed("embed"):
        if method == "netmf":
            m = walk_matrix_sum(g, K, sparse=True, isolated=p["isolated"])
            e = direct_factorize(netmf_transform(m, g, resolved["negatives"]), d, seed=seed)
        elif method == "grarep":
            e = grarep(g, d, K, guard=p["dense_guard"], seed=seed, isolated=p["isolated"])
        elif method == "softmax-exact":
            m = walk_matrix_sum(g, K, guard=p["dense_guard"], isolated=p["isolated"])
            e = softmax_factorize(m, d, steps=p["steps"], step_size=resolved["step_size"], seed=seed)
        else:
            corpus = sample_walks(g, p["walks_per_node"], p["walk_length"], resolved["p"], resolved["q"], seed)
            if p["dump_walks"]:
                with open(run.output(p["dump_walks"]), "w") as fh:
                    corpus.write(fh)
            e = sgns_from_walks(corpus, d, K, resolved["negatives"], p["epochs"], resolved["step_size"], seed)
    with open(run.output(p["out"]), "w") as fh:
        write_embedding(e, fh, list(g.labels))
    print(f"{method}: {e.dim} x {e.n} embedding written to {p['out']}")
    return _manifest_path(p["out"])


def _structural_from(p, g, cs, run):
    from .ppr import PprCache, PprParams
    from .scoring import LogisticModel, StructuralScorer, TrainConfig, structural_scorer

    if p.get("model"):
        with open(run.input(p["model"])) as fh:
            model = LogisticModel.from_json(fh.read())
        prov = model.provenance
        params = PprParams(prov.get("alpha", p["alpha"]), prov.get("r_max", p["r_max"]))
        return StructuralScorer(g, PprCache(g, params), model)
    cfg = TrainConfig(p["anchors"], p["min_comm_size"], p["train_seed"], p["l2"],
                      p.get("max_iters", 10_000), p.get("tol", 1e-8))
    return structural_scorer(g, cs, PprParams(p["alpha"], p["r_max"]), cfg)


def cmd_baseline_train(p, run):
    from .features import FEATURE_NAMES

    g, cs = load_graph(p, run)
    p = {**p, "train_seed": p["seed"]}
    with run.timed("train"):
        scorer = _structural_from(p, g, cs, run)
    model = scorer.model
    model.provenance["anchors"] = [g.labels[a] for a in model.provenance["anchors"]]
    with open(run.output(p["out"]), "w") as fh:
        fh.write(model.to_json() + "\n")
    if p["dump_features"]:
        index = g.index_of
        with open(run.output(p["dump_features"]), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "v", *FEATURE_NAMES, "label"])
            for label in model.provenance["anchors"]:
                a = index[label]
                feats = scorer.features_from(a)
                mask = cs.partner_mask(a)
                for u in range(g.node_count):
                    if u != a:
                        w.writerow([label, g.labels[u], *(repr(float(x)) for x in feats[u, :3]),
                                    int(feats[u, 3]), int(mask[u])])
    prov = model.provenance
    print(f"trained on {len(prov['anchors'])} anchors; converged={prov.get('converged')} "
          f"loss={prov.get('final_loss', float('nan')):.6g}")
    return _manifest_path(p["out"])


def cmd_evaluate(p, run):
    from .evaluation import evaluate_method
    from .scoring import DotScorer, HadamardScorer

    g, cs = load_graph(p, run)
    p = dict(p)
    if p["train_seed"] is None:
        p["train_seed"] = p["seed"] + 1
    run.seeds["train_seed"] = p["train_seed"]
    scorer_name = p["scorer"]
    with run.timed("prepare"):
        if scorer_name == "structural-lr":
            scorer = _structural_from(p, g, cs, run)
            default_name = "LR-Structural"
        else:
            if not p["embedding"]:
                raise CommlabError(f"--scorer {scorer_name} needs --embedding")
            e = load_aligned_embedding(p["embedding"], g, run)
            if scorer_name == "dot":
                scorer = DotScorer(e)
            else:
                scorer = HadamardScorer.train(e, g, cs, p["anchors"], p["min_comm_size"], p["train_seed"],
                                              l2_strength=p["l2"])
            default_name = os.path.splitext(os.path.basename(p["embedding"]))[0]
    min_k = p["min_k"] if p["min_k"] is not None else p["k"]
    with run.timed("evaluate"):
        report = evaluate_method(scorer, g, cs, p["samples"], p["k"], p["seed"], min_k,
                                 method=p["method_name"] or default_name, workers=p["workers"])
    report.vertices = [g.labels[v] for v in report.vertices]
    report.params.update(graph=p["graph_name"] or os.path.basename(p.get("graph") or p.get("edges") or ""),
                         graph_digest=g.digest, train_seed=p["train_seed"])
    with open(run.output(p["out"]), "w") as fh:
        fh.write(report.to_json() + "\n")
    if p["curve_csv"]:
        with open(run.output(p["curve_csv"]), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["precision_at_least", "fraction_of_vertices"])
            for x, y in report.curve:
                w.writerow([repr(x), repr(y)])
    print(f"{report.method}: mean precision@{report.k} = {report.mean_precision:.4f} "
          f"over {len(report.precisions)} vertices")
    return _manifest_path(p["out"])


def cmd_gram_bound(p, run):
    from .embed import read_embedding
    from .theory import gram_bound_campaign, verify_gram_bound

    eps = p["epsilons"] or [0.05, 0.1, 0.2]
    if p["embedding"]:
        with open(run.input(p["embedding"])) as fh:
            e, _ = read_embedding(fh)
        out = {"reports": [verify_gram_bound(e, x, rescale=True).to_dict() for x in eps]}
        out["violations"] = sum(not r["holds"] for r in out["reports"])
    else:
        with run.timed("campaign"):
            out = gram_bound_campaign(p["instances"], p["max_n"], p["max_d"], eps, p["seed"]).to_dict()
    _dump_json(run.output(p["out"]), out)
    print(f"violations: {out['violations']}")
    return _manifest_path(p["out"]), 1 if out["violations"] else 0


def cmd_construct(p, run):
    from .embed import write_embedding
    from .theory import _block_intra_log_min, block_construction, softmax_community_pairs

    with run.timed("construct"):
        e = block_construction(p["n"], p["b"], p["c"], p["construct_seed"])
    b = p["b"]
    U = e.vectors[:, ::b]
    rows, _ = softmax_community_pairs(e, 1.0 / (2 * b))
    report = {**e.params, "min_intra_nsm": math.exp(_block_intra_log_min(U, b)),
              "threshold": 1.0 / (2 * b), "community_pairs": len(rows),
              "intra_block_pairs": (p["n"] // b) * b * (b - 1) // 2}
    prefix = p["out_prefix"]
    with open(run.output(f"{prefix}.embedding.txt"), "w") as fh:
        write_embedding(e, fh)
    _dump_json(run.output(f"{prefix}.json"), report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return f"{prefix}.manifest.json"


def cmd_perturb_sweep(p, run):
    from .plotting import write_svg
    from .theory import DEFAULT_DELTAS, delta_sweep, sweep_svg, write_sweep_csv

    e, b = _theory_embedding(p, run)
    eps = _default_epsilon(p, b)
    deltas = p["deltas"] or list(DEFAULT_DELTAS)
    with run.timed("sweep"):
        reports = delta_sweep(e, eps, deltas, p["trials"], p["seed"], p["workers"])
    prefix = p["out_prefix"]
    _dump_json(run.output(f"{prefix}.json"), {"epsilon": eps, "sweep": [r.to_dict() for r in reports]})
    write_sweep_csv(run.output(f"{prefix}.csv"), reports)
    write_svg(run.output(f"{prefix}.svg"), sweep_svg(reports, f"community-pair survival, epsilon={eps:.4g}"))
    for r in reports:
        print(f"delta={r.delta:<8g} mean survival={r.mean:.4f}")
    return f"{prefix}.manifest.json"


def cmd_lengths(p, run):
    from .theory import length_diagnostics

    e, b = _theory_embedding(p, run)
    r = length_diagnostics(e, _default_epsilon(p, b))
    _dump_json(run.output(p["out"]), r.to_dict())
    print(json.dumps(r.to_dict(), indent=2, sort_keys=True))
    return _manifest_path(p["out"])


def _read_reports(paths, run):
    from .evaluation import EvalReport

    if not paths:
        raise CommlabError("no reports given")
    out = []
    for path in paths:
        with open(run.input(path)) as fh:
            out.append(EvalReport.from_json(fh.read()))
    return out


def _series_name(r) -> str:
    g = r.params.get("graph")
    return f"{r.method} ({g})" if g else r.method


def cmd_plot(p, run):
    from .plotting import line_chart_svg, write_svg

    reports = _read_reports(p["reports"], run)
    series = {}
    for r in reports:
        name = _series_name(r)
        while name in series:
            name += "'"
        series[name] = r.curve
    svg = line_chart_svg(series, p["title"], f"precision@{reports[0].k} at least x",
                         "fraction of sampled vertices", xlim=(0.0, 1.0), ylim=(0.0, 1.0))
    write_svg(run.output(p["out"]), svg)
    print(f"{len(series)} curves written to {p['out']}")
    return _manifest_path(p["out"])


def cmd_report(p, run):
    reports = _read_reports(p["reports"], run)
    graphs = list(dict.fromkeys(r.params.get("graph", "") for r in reports))
    methods = list(dict.fromkeys(r.method for r in reports))
    cell = {(r.method, r.params.get("graph", "")): r.mean_precision for r in reports}
    with open(run.output(p["out"]), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", *graphs])
        for m in methods:
            w.writerow([m, *(f"{cell[m, g]:.4f}" if (m, g) in cell else "" for g in graphs)])
    with open(p["out"]) as fh:
        print(fh.read(), end="")
    return _manifest_path(p["out"])


HANDLERS = {
    "gen-sbm": cmd_gen_sbm,
    "ingest": cmd_ingest,
    "embed": cmd_embed,
    "baseline-train": cmd_baseline_train,
    "evaluate": cmd_evaluate,
    "theory gram-bound": cmd_gram_bound,
    "theory construct": cmd_construct,
    "theory perturb-sweep": cmd_perturb_sweep,
    "theory lengths": cmd_lengths,
    "plot": cmd_plot,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: usage errors exit 2, --help exits 0
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    command = ns.command if ns.command != "theory" else f"theory {ns.theory_command}"
    try:
        params, sources = resolve(command, ns)
        run = RunManifest(command, params, sources)
        if "seed" in params:
            run.seeds["seed"] = params["seed"]
        with run.timed("total"):
            result = HANDLERS[command](params, run)
        manifest, status = result if isinstance(result, tuple) else (result, 0)
        run.write(manifest)
        return status
    except GuardError as exc:
        print(f"commlab: refused: {exc}", file=sys.stderr)
        return exc.exit_code
    except CommlabError as exc:
        print(f"commlab: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"commlab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
