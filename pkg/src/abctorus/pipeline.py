"""End-to-end orchestration: configuration, the staged build, verification
of persisted artifacts, and cross-build comparison.

A run writes, under its output directory: the parameter chain, one word
file per stage, per-stage JSON dumps (grid, permutation, prescriptions),
analytic maps with hex-exact coefficients, an orbit-coding trace CSV per
stage, PNG plots, and a deterministic ``report.json`` (wall-clock timings
go to a separate sidecar so reports stay byte-identical across runs).
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analytic as ana
from . import blockslide as bsl
from . import orbit_coding as oc
from . import towers as tw
from . import words as wd
from .params import StageParams, advance, dump_params, j_table, load_params


class ConfigError(ValueError):
    """Raised for malformed configuration files or inconsistent schedules."""


def worker_count() -> int:
    """Parallelism cap from the ABC_THREADS environment variable."""
    raw = os.environ.get("ABC_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, min(n, os.cpu_count() or 1))


@dataclass
class RunConfig:
    stages: int = 2
    sigma_size: int = 2
    k_schedule: tuple[int, ...] = (2, 2)
    l_schedule: tuple = (2, 4)          # ints or "auto"
    s_schedule: tuple[int, ...] = (2, 2, 2)
    rho: float = 0.1
    eps0: float = 1.0
    seed: int = 0
    out_dir: str = "out"
    profile: str = "strip_safe"         # or "accurate"
    harmonics: int = 2                  # fixed order in strip_safe mode
    shear_eps: float = 2e-3             # adaptive targets in accurate mode
    shear_delta: float = 0.05
    l_budget: int = 64
    strip_grid: int = 16
    mc_samples: int = 20000
    orbit_samples: int = 200
    jacobian_points: int = 1000
    max_word_len: int = 200_000
    plots: bool = True
    variant_from: int = -1   # reseed prescriptions from this step (-1: never)
    variant_seed: int = 1

    def __post_init__(self) -> None:
        if self.stages < 1:
            raise ConfigError("need at least one stage")
        if len(self.k_schedule) != self.stages or len(self.l_schedule) != self.stages:
            raise ConfigError(
                f"k/l schedules must have length stages={self.stages}")
        if len(self.s_schedule) != self.stages + 1:
            raise ConfigError(
                f"s schedule must have length stages+1={self.stages + 1}")
        if self.s_schedule[0] != self.sigma_size:
            raise ConfigError("s_schedule[0] must equal the alphabet size")
        if self.rho <= 0:
            raise ConfigError("rho must be positive")
        for l in self.l_schedule:
            if l != "auto" and (not isinstance(l, int) or l < 2):
                raise ConfigError(f"l entries must be ints >= 2 or 'auto', got {l!r}")
        if self.profile not in ("strip_safe", "accurate"):
            raise ConfigError(f"unknown profile {self.profile!r}")

    def eps_n(self, n: int) -> float:
        return self.eps0 * 2.0 ** (-n)

    def to_json_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "stages", "sigma_size", "rho", "eps0", "seed", "profile",
            "harmonics", "shear_eps", "shear_delta", "l_budget", "strip_grid",
            "mc_samples", "orbit_samples", "jacobian_points", "max_word_len")}
        d["k_schedule"] = list(self.k_schedule)
        d["l_schedule"] = list(self.l_schedule)
        d["s_schedule"] = list(self.s_schedule)
        return d


def _parse_value(text: str):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return tuple(_parse_value(t) for t in inner.split(",")) if inner else ()
    if text.startswith('"') and text.endswith('"'):
        return text[1:-1]
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Key = value configuration file (comments start with #); explicit
    flag overrides win over file values."""
    data: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key = value")
        key, val = line.split("=", 1)
        data[key.strip()] = _parse_value(val)
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# prescription generation


def rotational_prescriptions(k: int, s: int, rng: np.random.Generator
                             ) -> list[tuple[int, ...]]:
    """s distinct tuples of the shifted form tuple_r[t] = (r + d_t) mod s,
    with the shift multiset balanced so every letter occurs k/s times in
    every tuple."""
    if k % s:
        raise ConfigError(f"s={s} must divide k={k}")
    shifts = [r for r in range(s) for _ in range(k // s)]
    rng.shuffle(shifts)
    return [tuple((r + d) % s for d in shifts) for r in range(s)]


def random_prescriptions(k: int, s_prev: int, s_next: int,
                         rng: np.random.Generator) -> list[tuple[int, ...]]:
    """s_next distinct balanced tuples (each letter k/s_prev times)."""
    base = [sym for sym in range(s_prev) for _ in range(k // s_prev)]
    seen: set = set()
    out: list[tuple[int, ...]] = []
    guard = 0
    while len(out) < s_next:
        t = tuple(rng.permutation(base).tolist())
        if t not in seen:
            seen.add(t)
            out.append(t)
        guard += 1
        if guard > 100000:
            raise ConfigError(
                f"cannot draw {s_next} distinct balanced tuples for k={k}, "
                f"s={s_prev}")
    return out


def make_prescriptions(k: int, s_prev: int, s_next: int,
                       rng: np.random.Generator) -> list[tuple[int, ...]]:
    if s_next == s_prev:
        return rotational_prescriptions(k, s_prev, rng)
    return random_prescriptions(k, s_prev, s_next, rng)


# ---------------------------------------------------------------------------
# the build


@dataclass
class BuiltStage:
    params: StageParams
    h: tw.GridPermutation | None
    blockslide: bsl.BlockSlideMap | None
    analytic: ana.AnalyticStage
    tuples: tuple[tuple[int, ...], ...] | None
    l_star: ana.LStarResult | None


@dataclass
class BuildResult:
    config: RunConfig
    stages: list[BuiltStage]
    sequence: wd.ConstructionSequence | None
    families: list[wd.WordFamily]
    report: dict
    timings: dict


def _analytic_h(h: tw.GridPermutation, cfg: RunConfig
                ) -> tuple[bsl.BlockSlideMap, ana.BlockSlideApprox]:
    bs = bsl.permutation_to_blockslide(h)
    kwargs = {"harmonics": cfg.harmonics} if cfg.profile == "strip_safe" else {}
    approx = ana.approx_blockslide(bs, h.q, eps=cfg.shear_eps,
                                   delta=cfg.shear_delta, **kwargs)
    return bs, approx


def run_build(cfg: RunConfig) -> BuildResult:
    t_start = time.perf_counter()
    timings: dict = {}
    rng = np.random.default_rng(cfg.seed)
    alphabet = wd.Alphabet.default(cfg.sigma_size)

    # stage 0
    params: list[StageParams] = []
    prescriptions: list[tuple[tuple[int, ...], ...]] = []
    stage0_par = StageParams(n=0, k=cfg.k_schedule[0], l=2,
                             s=cfg.sigma_size, p=1, q=1)
    built: list[BuiltStage] = [BuiltStage(
        params=stage0_par, h=None, blockslide=None,
        analytic=ana.AnalyticStage(stage0_par, None,
                                   ana.rotation_map(Fraction(1, 1)), None),
        tuples=None, l_star=None)]

    for n in range(cfg.stages):
        t0 = time.perf_counter()
        prev = built[n].params
        s_next = cfg.s_schedule[n + 1]
        if n == cfg.variant_from:
            rng = np.random.default_rng(cfg.variant_seed)
        tuples = tuple(make_prescriptions(prev.k, prev.s, s_next, rng))
        h = tw.h_from_words(tuples, prev, s_next)
        bs, approx = _analytic_h(h, cfg)
        l_req = cfg.l_schedule[n]
        l_star = None
        if l_req == "auto":
            l_star = ana.find_l_star(
                [b.analytic for b in built], [approx.map], s_next,
                cfg.rho, cfg.eps_n(n), cfg.l_budget, cfg.strip_grid)
            l_n = l_star.l_star
        else:
            l_n = l_req
        prev = StageParams(n=prev.n, k=prev.k, l=l_n, s=prev.s,
                           p=prev.p, q=prev.q)
        built[n] = replace(built[n], params=prev,
                           analytic=replace(built[n].analytic, params=prev))
        k_next = cfg.k_schedule[n + 1] if n + 1 < cfg.stages else 2
        par_next = advance(prev, k=k_next, l=2, s_next=s_next)
        stage_a = ana.build_stage([b.analytic for b in built], approx.map,
                                  par_next, cfg.rho, cfg.strip_grid)
        built.append(BuiltStage(params=par_next, h=h, blockslide=bs,
                                analytic=stage_a, tuples=tuples,
                                l_star=l_star))
        prescriptions.append(tuples)
        timings[f"stage_{n + 1}_build"] = time.perf_counter() - t0

    params = [b.params for b in built]

    # word families (materialized while the lengths stay reasonable)
    t0 = time.perf_counter()
    families = [wd.WordFamily(0, 1, tuple((c,) for c in alphabet.letters))]
    materialized = cfg.stages
    for n in range(cfg.stages):
        par = params[n]
        if par.q * par.q * par.k * par.l > cfg.max_word_len:
            materialized = n
            break
        prev_words = families[n].words
        new_words = tuple(
            wd.circular_word([prev_words[i] for i in prescriptions[n]
                              [j]], par.p, par.q, par.l)
            for j in range(len(prescriptions[n])))
        families.append(wd.WordFamily(n + 1, params[n + 1].q, new_words))
    sequence = None
    if materialized == cfg.stages:
        sequence = wd.ConstructionSequence(
            alphabet, tuple(params), tuple(families), tuple(prescriptions))
    timings["words"] = time.perf_counter() - t0

    report = _verdicts(cfg, built, families, sequence, alphabet, materialized)
    timings["total"] = time.perf_counter() - t_start
    return BuildResult(cfg, built, sequence, families, report, timings)


def _verdicts(cfg: RunConfig, built: list[BuiltStage],
              families: list[wd.WordFamily],
              sequence: wd.ConstructionSequence | None,
              alphabet: wd.Alphabet, materialized: int) -> dict:
    verdicts: dict = {}
    stage_reports = []
    rng = np.random.default_rng(cfg.seed + 1)

    for n in range(1, cfg.stages + 1):
        b = built[n]
        prev = built[n - 1].params
        sr: dict = {"n": n, "params": b.params.to_json_dict(),
                    "l_star": None if b.l_star is None else {
                        "found": b.l_star.found, "l": b.l_star.l_star,
                        "gap": b.l_star.gap, "threshold": b.l_star.threshold,
                        "history": [list(x) for x in b.l_star.history]}}
        have_words = n <= materialized

        if have_words:
            fam = families[n]
            sr["readability"] = readability_verdict(fam.words, prev, b.tuples)
            trace = oc.simulate_transect(prev.p, prev.q, prev.k, prev.l)
            mismatches = []
            for j, t in enumerate(b.tuples):
                label_words = [families[n - 1].words[i] for i in t]
                name = oc.transect_name(trace, label_words)
                if name != fam.words[j]:
                    pos = next(i for i in range(len(name))
                               if name[i] != fam.words[j][i])
                    mismatches.append([j, pos])
            sr["oracle_match"] = {"ok": not mismatches, "mismatches": mismatches}
            names = tw.tower_names(families[n - 1].words, b.h, prev)
            sr["roundtrip"] = {"ok": names == fam.words}
            sr["word_count"] = len(fam.words)
            sr["q"] = fam.q
            sr["boundary_fraction_exact"] = all(
                wd.boundary_count(w) * prev.l == len(w) for w in fam.words)
        else:
            sr["skipped_scale"] = True

        atoms_ok = bsl.verify_permutation_realization(b.h, b.blockslide)
        sr["blockslide"] = {"slide_count": len(b.blockslide), "atoms_ok": atoms_ok}

        pts = rng.random((cfg.jacobian_points, 2))
        res_h = ana.commutation_residual(_stage_h_map(built, n), prev.q, pts)
        jd = ana.jacobian_determinants(b.analytic.transform, pts)
        auto = cfg.l_schedule[n - 1] == "auto"
        gap = b.analytic.gap_from_previous
        thr = cfg.eps_n(n - 1) / 2.0
        sr["analytic"] = {
            "commutation_residual_h": res_h,
            "commutation_ok": bool(res_h <= 1e-12),
            "jacobian_max_err": float(np.abs(jd - 1.0).max()),
            "jacobian_ok": bool(np.abs(jd - 1.0).max() < 1e-6),
            "d_rho_gap": gap,
            "gap_threshold": thr,
            "cauchy_enforced": auto,
            "cauchy_ok": bool(gap < thr) if auto else None,
            "shear_count": len(b.analytic.transform),
        }
        stage_reports.append(sr)

    verdicts["stages"] = stage_reports

    # requirements of the scheme
    abc_stages = [tw.AbcStage(built[0].params, None,
                              families[0].words if materialized >= 0 else ())]
    for n in range(1, cfg.stages + 1):
        abc_stages.append(tw.AbcStage(built[n].params, built[n].h, ()))
    verdicts["requirements"] = tw.requirements_check(abc_stages)

    # epsilon-approximation of consecutive stage processes (exact atoms)
    eps_rows = []
    for n in range(1, cfg.stages):
        par_next = built[n + 1].params
        if par_next.q * par_next.s > 1 << 18:
            eps_rows.append({"n": n, "skipped_scale": True})
            continue
        coarse = tw.stage_process(abc_stages, n, par_next.q, par_next.s)
        fine = tw.stage_process(abc_stages, n + 1, par_next.q, par_next.s)
        l_n = built[n].params.l
        res = tw.epsilon_approximation_check(coarse, fine, Fraction(3, l_n))
        eps_rows.append({"n": n, "ok": res.ok, "mass": str(res.mass),
                         "bound": f"3/{l_n}"})
    verdicts["eps_approximation"] = eps_rows

    # uniformity of the prescriptions
    if sequence is not None:
        uni = [wd.uniformity_check(sequence, n).to_json_dict()
               for n in range(sequence.depth)]
        verdicts["uniformity"] = uni

    # stage-1 empirical names along analytic orbits
    if materialized >= 1:
        verdicts["name_agreement"] = name_agreement(
            built, families, alphabet, cfg.orbit_samples, cfg.seed + 2)

    flat_ok = True
    for sr in stage_reports:
        for key in ("readability", "oracle_match", "roundtrip"):
            if key in sr and not sr[key]["ok"]:
                flat_ok = False
        if not sr["blockslide"]["atoms_ok"]:
            flat_ok = False
        a = sr["analytic"]
        if not (a["commutation_ok"] and a["jacobian_ok"]):
            flat_ok = False
        if a["cauchy_enforced"] and not a["cauchy_ok"]:
            flat_ok = False
    if not verdicts["requirements"]["all_pass"]:
        flat_ok = False
    for row in eps_rows:
        if not row.get("ok", True):
            flat_ok = False
    if "name_agreement" in verdicts and not verdicts["name_agreement"]["ok"]:
        flat_ok = False
    verdicts["all_pass"] = flat_ok
    return verdicts


def _stage_h_map(built: list[BuiltStage], n: int) -> ana.AnalyticMap:
    """The analytic tower map of stage n (h_n approximant)."""
    return built[n].analytic.h_map


def readability_verdict(words, prev: StageParams, tuples) -> dict:
    """Unique readability with the honest guarantee regime: q < l/2 and,
    at the degenerate q = 1 (where every block carries the same boundary
    runs), readable prescriptions as well.  Outside the regime the outcome
    is recorded with no claim."""
    readable, witness = wd.unique_readability_check(words)
    guaranteed = prev.q < prev.l / 2
    if guaranteed and prev.q == 1:
        tuples_ok, _ = wd.unique_readability_check(
            [tuple(str(i) for i in t) for t in tuples])
        guaranteed = tuples_ok
    return {"ok": readable or not guaranteed,
            "readable": readable,
            "guaranteed_regime": guaranteed,
            "witness": None if readable else
            [wd.word_text(witness[0]), wd.word_text(witness[1]),
             wd.word_text(witness[2]), witness[3]]}


def name_agreement(built: list[BuiltStage], families: list[wd.WordFamily],
                   alphabet: wd.Alphabet, samples: int, seed: int) -> dict:
    """Empirical symbolic names of stage-1 analytic orbits against the
    stage-1 tower words.

    Sample points are located in their tower/level with the exact slide
    map; each orbit step is labelled by the horizontal band of the torus it
    lands in, and compared with the stage-1 word at the aligned position.
    Boundary positions of the word never match a band letter and are part
    of the mismatch budget.
    """
    par1 = built[1].params
    par0 = built[0].params
    q1, s1, s0 = par1.q, par1.s, par0.s
    bs = built[1].blockslide
    h_a = built[1].analytic.h_map
    fam = families[1]
    dc, dr = bs.lattice_denominators()
    scale = 1 << 16
    dx = bsl._lcm(dc, q1) * scale
    dy = bsl._lcm(dr, s1) * scale
    rng = np.random.default_rng(seed)
    xi = rng.integers(0, dx, size=samples, dtype=np.int64)
    yi = rng.integers(0, dy, size=samples, dtype=np.int64)
    xs, ys = bs.inverse().apply_lattice(xi, yi, dx, dy)
    cols = (xs * q1) // dx
    rows = (ys * s1) // dy
    jt = j_table(par1.p, par1.q)
    levels = np.array([jt[c] for c in cols % q1])
    pts = np.stack([xi / dx, yi / dy], axis=1)
    base = h_a.inverse().apply(pts)
    alpha = float(Fraction(par1.p, par1.q) % 1)
    letter_index = {c: i for i, c in enumerate(alphabet.letters)}
    match = 0
    total = 0
    word_idx = np.array([[letter_index.get(fam.words[rows[i]][(levels[i] + t) % q1], -1)
                          for t in range(q1)] for i in range(samples)])
    for t in range(q1):
        shifted = base.copy()
        shifted[:, 0] += t * alpha
        img = h_a.apply(shifted, reduce=True)
        band = np.floor(img[:, 1] * s0).astype(np.int64) % s0
        match += int(np.sum(band == word_idx[:, t]))
        total += samples
    frac = match / total
    threshold = 1.0 - 3.0 / par0.l - 0.05
    return {"ok": frac >= threshold, "fraction": frac, "threshold": threshold,
            "samples": samples}


# ---------------------------------------------------------------------------
# persistence


def write_artifacts(result: BuildResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "params.json").write_text(
        dump_params([b.params for b in result.stages]), encoding="utf-8")
    for fam in result.families:
        wd.write_family(out / f"words_stage{fam.stage}.txt", fam)
    for n, b in enumerate(result.stages):
        if b.h is None:
            continue
        dump = {
            "n": n,
            "grid": {"cols": b.h.k * b.h.q, "rows": b.h.s},
            "k": b.h.k, "q": b.h.q, "s": b.h.s,
            "s_prev": result.stages[n - 1].params.s,
            "permutation": _perm_as_indices(b.h),
            "prescriptions": [list(t) for t in b.tuples],
            "tower_words_file": f"words_stage{n}.txt",
            "blockslide": b.blockslide.to_json_list(),
        }
        (out / f"stage{n}.json").write_text(
            json.dumps(dump, indent=1, sort_keys=True), encoding="utf-8")
        prev = result.stages[n - 1].params
        trace = oc.simulate_transect(prev.p, prev.q, prev.k, prev.l)
        if trace.q_fine <= result.config.max_word_len:
            oc.write_trace_csv(out / f"trace_stage{n}.csv", trace)
        maps = {
            "h": b.analytic.h_map.to_json_list(),
            "transform": b.analytic.transform.to_json_list(),
            "alpha": str(b.params.alpha),
        }
        (out / f"analytic_stage{n}.json").write_text(
            json.dumps(maps, indent=1, sort_keys=True), encoding="utf-8")
    report = {"config": result.config.to_json_dict(), **result.report}
    (out / "report.json").write_text(
        json.dumps(report, indent=1, sort_keys=True), encoding="utf-8")
    (out / "timings.json").write_text(
        json.dumps(result.timings, indent=1, sort_keys=True), encoding="utf-8")
    if result.config.plots:
        from . import plots
        plots.emit_all(result, out)
    return out


def _perm_as_indices(h: tw.GridPermutation) -> list[int]:
    cols = h.k * h.q
    out = []
    for r in range(h.s):
        for c in range(cols):
            c2, r2 = h.atom_image(c, r)
            out.append(r2 * cols + c2)
    return out


# ---------------------------------------------------------------------------
# verify / compare


def _verify_one(raw: str) -> dict:
    p = Path(raw)
    if p.is_dir():
        return _verify_dir(p)
    fam = wd.read_family(p)
    good, witness = wd.unique_readability_check(fam.words)
    return {"path": str(p), "readability": {
        "ok": good,
        "witness": None if good else [wd.word_text(witness[0]),
                                      wd.word_text(witness[1]),
                                      wd.word_text(witness[2]),
                                      witness[3]]}}


def verify_paths(paths: Sequence[str]) -> dict:
    """Re-run the machine checks against persisted artifacts.

    Directories are treated as build outputs; single files as word files
    (readability only).  Independent paths are checked on up to
    ABC_THREADS workers; results keep the argument order.
    """
    workers = min(worker_count(), max(len(paths), 1))
    if workers > 1 and len(paths) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_verify_one, paths))
    else:
        results = [_verify_one(p) for p in paths]
    ok = all(_all_ok(r) for r in results)
    return {"results": results, "all_pass": ok}


def _all_ok(node) -> bool:
    if isinstance(node, dict):
        if "ok" in node and node["ok"] is False:
            return False
        return all(_all_ok(v) for v in node.values())
    if isinstance(node, list):
        return all(_all_ok(v) for v in node)
    return True


def _verify_dir(p: Path) -> dict:
    params = load_params((p / "params.json").read_text(encoding="utf-8"))
    out: dict = {"path": str(p), "stages": []}
    families = {}
    for f in sorted(p.glob("words_stage*.txt")):
        fam = wd.read_family(f)
        families[fam.stage] = fam
    for f in sorted(p.glob("stage*.json")):
        dump = json.loads(f.read_text(encoding="utf-8"))
        n = dump["n"]
        prev = params[n - 1]
        h = _perm_from_indices(dump)
        sr: dict = {"n": n}
        if n in families and (n - 1) in families:
            fam = families[n]
            sr["readability"] = readability_verdict(
                fam.words, prev, dump["prescriptions"])
            names = tw.tower_names(families[n - 1].words, h, prev)
            if names == fam.words:
                sr["name_match"] = {"ok": True}
            else:
                bad = []
                for j, (a, b) in enumerate(zip(names, fam.words)):
                    if a != b:
                        pos = next(i for i in range(len(a)) if a[i] != b[i])
                        bad.append([j, pos])
                sr["name_match"] = {"ok": False, "witnesses": bad}
            trace = oc.simulate_transect(prev.p, prev.q, prev.k, prev.l)
            mism = []
            for j, t in enumerate(dump["prescriptions"]):
                name = oc.transect_name(
                    trace, [families[n - 1].words[i] for i in t])
                if name != fam.words[j]:
                    mism.append(j)
            sr["oracle_match"] = {"ok": not mism, "mismatches": mism}
        bs = bsl.BlockSlideMap.from_json_list(dump["blockslide"])
        sr["blockslide"] = {"ok": bsl.verify_permutation_realization(h, bs)}
        af = p / f"analytic_stage{n}.json"
        if af.exists():
            maps = json.loads(af.read_text(encoding="utf-8"))
            hmap = ana.AnalyticMap.from_json_list(maps["h"])
            tmap = ana.AnalyticMap.from_json_list(maps["transform"])
            pts = np.random.default_rng(0).random((200, 2))
            res = ana.commutation_residual(hmap, prev.q, pts)
            jd = ana.jacobian_determinants(tmap, pts)
            sr["analytic"] = {
                "ok": bool(res <= 1e-12 and np.abs(jd - 1).max() < 1e-6),
                "commutation_residual": res,
                "jacobian_max_err": float(np.abs(jd - 1).max())}
        out["stages"].append(sr)
    return out


def _perm_from_indices(dump: dict) -> tw.GridPermutation:
    cols = dump["grid"]["cols"]
    rows = dump["grid"]["rows"]
    mapping = {}
    flat = dump["permutation"]
    for r in range(rows):
        for c in range(cols):
            idx = flat[r * cols + c]
            mapping[(c, r)] = (idx % cols, idx // cols)
    return tw.GridPermutation.from_mapping(dump["k"], dump["q"], dump["s"],
                                           mapping)


def compare_runs(dir_a, dir_b, rho: float | None = None,
                 strip_grid: int = 16) -> dict:
    """Longest shared stage prefix of two builds and the estimated strip
    distance between their final transforms; when at least one stage is
    shared the estimate is checked against the stage schedule bound."""
    a, b = Path(dir_a), Path(dir_b)
    pa = load_params((a / "params.json").read_text(encoding="utf-8"))
    pb = load_params((b / "params.json").read_text(encoding="utf-8"))
    ra = json.loads((a / "report.json").read_text(encoding="utf-8"))
    rb = json.loads((b / "report.json").read_text(encoding="utf-8"))
    if ra["config"]["sigma_size"] != rb["config"]["sigma_size"]:
        raise ConfigError("builds use incompatible alphabets")
    fams_a = {wd.read_family(f).stage: wd.read_family(f)
              for f in a.glob("words_stage*.txt")}
    fams_b = {wd.read_family(f).stage: wd.read_family(f)
              for f in b.glob("words_stage*.txt")}
    m = 0
    while m in fams_a and m in fams_b and \
            fams_a[m].words == fams_b[m].words and \
            m < min(len(pa), len(pb)) and \
            (pa[m].q, pa[m].s) == (pb[m].q, pb[m].s):
        m += 1
    rho = rho if rho is not None else float(ra["config"]["rho"])
    last_a = max(int(f.stem[len("analytic_stage"):])
                 for f in a.glob("analytic_stage*.json"))
    last_b = max(int(f.stem[len("analytic_stage"):])
                 for f in b.glob("analytic_stage*.json"))
    ta = ana.AnalyticMap.from_json_list(json.loads(
        (a / f"analytic_stage{last_a}.json").read_text())["transform"])
    tb = ana.AnalyticMap.from_json_list(json.loads(
        (b / f"analytic_stage{last_b}.json").read_text())["transform"])
    est = ana.strip_distance(ta, tb, rho, strip_grid)
    out = {"shared_prefix": m, "d_rho": est.value, "rho": rho}
    if m >= 1:
        eps0 = float(ra["config"]["eps0"])
        bound = eps0 * 2.0 ** (-(m - 1))
        out["bound"] = bound
        out["ok"] = est.value < bound
    return out
