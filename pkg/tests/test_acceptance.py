"""Acceptance suite: one test per release criterion, at stated tolerances.

Run with `pytest tests/test_acceptance.py -v -s`; each criterion prints one
ACCEPTANCE <name>: PASS/FAIL line (hook in conftest).
"""

import hashlib
import io
import math
import time

import numpy as np
from fastapi.testclient import TestClient

from ptge.annotation import AnnotationStore, AnnotationError
from ptge.composer import ComposerBackend, composite_key, text_key
from ptge.embeddings import EmbeddingTable
from ptge.evaluation import RetrievalQuery, aggregate_trials, recall_at_k, target_rank
from ptge.masking import MaskConfig, apply_mask, plan_mask
from ptge.rng import PinnedRNG
from ptge.scoring import CandidatePair, ScoredPair, ScoreTable, score_all, score_pair
from ptge.selection import SelectionConfig, build_pool, kmeans_categorize, select, summarize
from ptge.service import create_app

from conftest import make_test_image
from test_annotation import make_round
from test_evaluation import oracle_rank
from test_selection import adjusted_rand_index, make_blobs


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return (v / np.linalg.norm(v)).astype(np.float32)


# -- criterion 1 -------------------------------------------------------------

def test_eq1_oracle_equivalence():
    """10^4 random pairs across dims 16..1024 match an independent 64-bit
    scalar reimplementation within 1e-6; trivial cases within 1e-6; < 5 s."""
    rng = np.random.default_rng(11)
    dims = [16, 32, 64, 128, 256, 512, 1024]
    n_total = 10_000
    start = time.perf_counter()
    checked = 0
    for dim in dims:
        n = n_total // len(dims) + (1 if dim == dims[-1] else 0)
        n += n_total - (n_total // len(dims)) * len(dims) if dim == dims[0] else 0
        composites = []
        images = []
        pairs = []
        raw = {}
        for i in range(n):
            f_c = rng.standard_normal(dim).astype(np.float32)
            f_t = rng.standard_normal(dim).astype(np.float32)
            pid, ref, tgt = f"p{dim}_{i}", f"r{dim}_{i}", f"t{dim}_{i}"
            composites.append((composite_key(ref, text_key("caption")), f_c))
            images.append((tgt, f_t))
            pairs.append(CandidatePair(pid, ref, tgt))
            raw[pid] = (f_c, f_t)
        backend = ComposerBackend(
            mode="precomputed", composites=EmbeddingTable.from_entries(composites)
        )
        image_table = EmbeddingTable.from_entries(images)
        for pair in pairs:
            got = score_pair(pair, "caption", backend, image_table).score
            f_c, f_t = raw[pair.pair_id]
            a, b = f_c.astype(np.float64), f_t.astype(np.float64)
            expected = 1.0 - math.fsum(a * b) / (
                math.sqrt(math.fsum(a * a)) * math.sqrt(math.fsum(b * b))
            )
            assert abs(got - expected) < 1e-6, pair.pair_id
            checked += 1
    assert checked >= n_total

    # trivial cases: identical -> 0, orthogonal -> 1, antipodal -> 2
    def single(f_c, f_t):
        backend = ComposerBackend(
            mode="precomputed",
            composites=EmbeddingTable.from_entries(
                [(composite_key("r", text_key("caption")), f_c)]
            ),
        )
        images = EmbeddingTable.from_entries([("t", f_t)])
        return score_pair(CandidatePair("p", "r", "t"), "caption", backend, images).score

    v = rng.standard_normal(64).astype(np.float32)
    assert abs(single(v, v) - 0.0) < 1e-6
    assert abs(single([1.0, 0.0], [0.0, 1.0]) - 1.0) < 1e-6
    assert abs(single(v, -v) - 2.0) < 1e-6

    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"took {elapsed:.2f}s"


# -- criterion 2 -------------------------------------------------------------

def test_pool_selection_oracle():
    """build_pool equals full-sort brute force (numpy lexsort oracle) on 200
    randomized tables, N in [10, 10^4], all three fractions; < 30 s."""
    rng = np.random.default_rng(22)
    start = time.perf_counter()
    for trial in range(200):
        n = int(rng.integers(10, 10_001))
        scores = rng.uniform(0, 2, n)
        quantize = rng.random(n) < 0.5  # force plenty of boundary ties
        scores[quantize] = np.round(scores[quantize], 2)
        ids = np.array([f"p{i:05d}" for i in rng.permutation(n)])
        entries = [
            ScoredPair(CandidatePair(ids[i], f"r{i}", f"t{i}"), float(scores[i]))
            for i in range(n)
        ]
        table = ScoreTable(entries)
        for fraction in (0.01, 0.0455, 0.25):
            got = build_pool(table, fraction, per_category=False)["all"]
            order = np.lexsort((ids, -scores))
            expected = list(ids[order][: math.ceil(fraction * n)])
            assert got == expected, f"trial {trial} fraction {fraction}"
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"took {elapsed:.2f}s"


# -- criterion 3 -------------------------------------------------------------

def _uniform_score_table(rng, n) -> ScoreTable:
    return ScoreTable(
        [
            ScoredPair(
                CandidatePair(f"p{i:05d}", f"r{i}", f"t{i}"), float(rng.uniform(0, 2))
            )
            for i in range(n)
        ]
    )


def test_sampling_soundness():
    """top_range_random never dips below the pool boundary (10^3 seeded
    runs); per-item inclusion over 10^4 seeds is chi-square uniform."""
    from scipy.stats import chi2

    rng = np.random.default_rng(33)
    table = _uniform_score_table(rng, 1000)
    score_of = {e.pair.pair_id: e.score for e in table.entries}
    pool = build_pool(table, 0.0455)["default"]
    assert len(pool) == 46
    non_pool_max = max(
        score_of[p] for p in score_of if p not in set(pool)
    )
    for seed in range(1000):
        round_ = select(
            table,
            SelectionConfig(shots_per_category=16, seed=seed, pool_fraction=0.0455),
        )
        chosen = round_.per_category["default"].chosen
        assert min(score_of[p] for p in chosen) >= non_pool_max

    counts = {pid: 0 for pid in pool}
    n_seeds = 10_000
    for seed in range(n_seeds):
        round_ = select(
            table,
            SelectionConfig(shots_per_category=8, seed=seed, pool_fraction=0.0455),
        )
        for pid in round_.per_category["default"].chosen:
            counts[pid] += 1
    expected = n_seeds * 8 / 46
    stat = sum((c - expected) ** 2 / expected for c in counts.values())
    assert stat < chi2.ppf(0.99, df=45), f"chi2 stat {stat:.1f}"


# -- criterion 4 -------------------------------------------------------------

def test_masking_exactness(tmp_path):
    """Default config masks exactly 48/64; pixel-diff is 48*1024 on 256x256;
    identical (id, seed) gives byte-identical PNGs across runs."""
    cfg = MaskConfig()
    plan = plan_mask("sample", cfg, seed=5)
    assert len(plan.masked_indices) == 48
    assert cfg.n_patches == 64

    from PIL import Image

    white = tmp_path / "white.png"
    Image.new("RGB", (256, 256), (255, 255, 255)).save(white)
    masked = np.asarray(apply_mask(white, plan, cfg))
    original = np.asarray(Image.open(white).convert("RGB"))
    diff = (masked != original).any(axis=2).sum()
    assert diff == 48 * 1024

    for image_id in ("a", "b", "c"):
        source = make_test_image(tmp_path / f"{image_id}.png")
        outputs = []
        for run in range(2):
            p = plan_mask(image_id, cfg, seed=77)
            buf = io.BytesIO()
            apply_mask(source, p, cfg).save(buf, format="PNG")
            outputs.append(hashlib.sha256(buf.getvalue()).hexdigest())
        assert outputs[0] == outputs[1]


# -- criterion 5 -------------------------------------------------------------

def test_kmeans_recovery():
    """4 sigma=0.1 blobs, 100 points each: ARI >= 0.99 in >= 9/10 seeds;
    inertia non-increasing at every iteration of every run."""
    rng = np.random.default_rng(55)
    ids, vectors, truth = make_blobs(rng, n_per=100, sigma=0.1, k=4, dim=4)
    table = EmbeddingTable.from_entries(zip(ids, vectors))
    good = 0
    for seed in range(10):
        assignment = kmeans_categorize(table, k=4, seed=seed)
        history = assignment.inertia_history
        assert all(
            history[i + 1] <= history[i] for i in range(len(history) - 1)
        ), f"seed {seed}: inertia increased"
        predicted = [assignment.assignments[i] for i in ids]
        if adjusted_rand_index(truth, predicted) >= 0.99:
            good += 1
    assert good >= 9, f"only {good}/10 seeds recovered the blobs"


# -- criterion 6 -------------------------------------------------------------

def test_recall_oracle():
    """50 queries x 200-item gallery match exhaustive ranking exactly,
    including tie-break; recall monotone in k on 100 random instances."""
    rng = np.random.default_rng(66)
    dim = 24
    base = [(f"g{i:03d}", rng.standard_normal(dim).astype(np.float32)) for i in range(160)]
    dups = [(f"g{i:03d}z", vec.copy()) for i, (_, vec) in enumerate(base[:40])]
    gallery = EmbeddingTable.from_entries(base + dups)  # 200 items, 40 exact ties
    ids = gallery.ids()
    queries = []
    for i in range(50):
        target = ids[int(rng.integers(len(ids)))]
        ref = ids[int(rng.integers(len(ids)))]
        exclude = frozenset({ref}) if ref != target else frozenset()
        queries.append(
            RetrievalQuery(
                query_id=f"q{i}",
                composed=rng.standard_normal(dim).astype(np.float32),
                target_id=target,
                gallery=gallery,
                exclude_ids=exclude,
            )
        )
    for query in queries:
        assert target_rank(query) == oracle_rank(query), query.query_id
    ks = [1, 5, 10, 50, 100]
    report = recall_at_k(queries, ks)
    for k in ks:
        expected = sum(1 for q in queries if oracle_rank(q) <= k) / len(queries)
        assert report.per_k[k] == expected

    for instance in range(100):
        small_gallery = EmbeddingTable.from_entries(
            (f"s{i}", rng.standard_normal(8).astype(np.float32)) for i in range(30)
        )
        small_ids = small_gallery.ids()
        qs = [
            RetrievalQuery(
                query_id=f"q{instance}_{j}",
                composed=rng.standard_normal(8).astype(np.float32),
                target_id=small_ids[int(rng.integers(30))],
                gallery=small_gallery,
            )
            for j in range(5)
        ]
        rep = recall_at_k(qs, [1, 3, 10, 30])
        values = [rep.per_k[k] for k in (1, 3, 10, 30)]
        assert values == sorted(values)
        assert rep.per_k[30] == 1.0


# -- criterion 7 -------------------------------------------------------------

def test_trial_aggregation():
    """Mean/stderr match closed-form recomputation to 1e-12; constant
    trials yield stderr exactly 0."""
    from ptge.evaluation import RecallReport

    rng = np.random.default_rng(77)

    def report(v):
        return RecallReport(per_k={10: v, 50: min(1.0, v + 0.2)},
                            per_subset={"all": {10: v, 50: min(1.0, v + 0.2)}},
                            query_count=100)

    values = [float(x) for x in rng.uniform(0.2, 0.8, 5)]
    agg = aggregate_trials([report(v) for v in values])
    n = len(values)
    mean = math.fsum(values) / n
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    assert abs(agg.overall[10].mean - mean) < 1e-12
    assert abs(agg.overall[10].stderr - std / math.sqrt(n)) < 1e-12

    constant = aggregate_trials([report(0.5) for _ in range(5)])
    assert constant.overall[10].mean == 0.5
    assert constant.overall[10].stderr == 0.0


# -- criterion 8 -------------------------------------------------------------

def test_end_to_end_selection_direction():
    """Toy composer on a graded-noise synthetic corpus: the top-range pool's
    mean score clears the global mean by >= 1 sample std, the easy-bottom
    pool's mean sits below it, and chosen sets order challenging > random >
    easy."""
    rng = np.random.default_rng(2024)
    n, dim = 2000, 32
    refs, texts, targets, pairs, captions = [], [], [], [], {}
    for i in range(n):
        r = unit(rng.standard_normal(dim))
        t = unit(rng.standard_normal(dim))
        caption = f"synthetic modification {i}"
        captions[f"t{i:05d}"] = caption
        refs.append((f"r{i:05d}", r))
        texts.append((text_key(caption), t))
        composite = unit(0.5 * r.astype(np.float64) + 0.5 * t.astype(np.float64))
        noise = 3.0 * (i / n) ** 6  # mostly easy pairs, a hard skewed tail
        g = unit(rng.standard_normal(dim))
        targets.append(
            (f"t{i:05d}", unit(composite.astype(np.float64) + noise * g.astype(np.float64)))
        )
        pairs.append(CandidatePair(f"p{i:05d}", f"r{i:05d}", f"t{i:05d}"))
    images = EmbeddingTable.from_entries(refs + targets)
    backend = ComposerBackend(
        mode="toy", images=images, texts=EmbeddingTable.from_entries(texts)
    )
    table = score_all(pairs, captions, backend, images)
    summary = summarize(table)
    assert summary.skewness > 0  # the difficulty grading skews low, like real corpora

    score_of = {e.pair.pair_id: e.score for e in table.entries}

    top_pool = build_pool(table, 0.0455)["default"]
    top_pool_mean = np.mean([score_of[p] for p in top_pool])
    assert top_pool_mean >= summary.mean + summary.std

    ranked_asc = sorted(score_of, key=lambda p: (score_of[p], p))
    easy_pool = ranked_asc[: math.ceil(0.25 * n)]
    easy_pool_mean = np.mean([score_of[p] for p in easy_pool])
    assert easy_pool_mean < summary.mean

    def chosen_mean(strategy, seed=7):
        round_ = select(
            table, SelectionConfig(strategy=strategy, shots_per_category=16, seed=seed)
        )
        return np.mean([score_of[p] for p in round_.per_category["default"].chosen])

    challenging = chosen_mean("top_range_random")
    random_mean = np.mean([chosen_mean("random", seed=s) for s in range(5)])
    easy = chosen_mean("easy_bottom")
    assert challenging > random_mean > easy


# -- criterion 9 -------------------------------------------------------------

def test_event_log_replay(tmp_path):
    """10^3 randomized mutation sequences; after every event a different
    store instance replays the log and must match the live state exactly."""
    rng = PinnedRNG(909)
    for trial in range(1000):
        log = tmp_path / f"ev{trial}.jsonl"
        live = AnnotationStore(log)
        round_ = make_round(n_pairs=6, categories=("a", "b"), shots=2, seed=trial)
        live.create_round(round_)
        pairs = list(live.round_view(round_.round_id)["pairs"])
        n_events = 3 + rng.randbelow(5)
        for step in range(n_events):
            action = rng.randbelow(4)
            pid = pairs[rng.randbelow(len(pairs))]
            try:
                if action in (0, 1):
                    live.submit_annotation(
                        round_.round_id, pid, f"text {trial}/{step}", "ann",
                        nonce=f"{trial}-{step}",
                    )
                elif action == 2:
                    live.submit_annotation(round_.round_id, pid, f"rev {step}", "ann2")
                else:
                    live.export_round(round_.round_id)
            except AnnotationError:
                pass  # rejected mutations append nothing
            assert AnnotationStore(log).snapshot() == live.snapshot(), (
                f"trial {trial} step {step}"
            )


# -- criterion 10 ------------------------------------------------------------

def test_primary_flow_without_frontend(tmp_path):
    """The annotation loop completes over plain HTTP fixtures, with no UI
    assets anywhere near the service."""
    store = AnnotationStore(tmp_path / "events.jsonl")
    app = create_app(store, media_dir=None, ui_dir=None)
    with TestClient(app) as client:
        round_ = make_round(n_pairs=6, categories=("a", "b"), shots=2)
        assert client.post("/rounds", json=round_.to_json()).status_code == 201
        rid = round_.round_id
        pairs = client.get(f"/rounds/{rid}/pairs?status=pending").json()["pairs"]
        for pair in pairs:
            resp = client.post(
                f"/rounds/{rid}/pairs/{pair['pair_id']}/annotation",
                json={"text": f"human text {pair['pair_id']}", "annotator": "a1"},
            )
            assert resp.status_code == 200
        assert client.post(f"/rounds/{rid}/export").status_code == 200
        manifest = client.get(f"/rounds/{rid}/export")
        lines = manifest.content.decode().strip().split("\n")
        assert len(lines) == 4
        # ui mount must not exist in this configuration
        assert client.get("/ui/").status_code == 404
