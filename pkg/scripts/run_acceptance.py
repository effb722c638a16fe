"""Produce every training artifact the acceptance suite checks.

Trains the calibrated classifier (if artifacts/classifier.ckpt is missing),
then the coach runs the acceptance criteria compare: 5 seeds for each of the
nine weight settings involved (baseline, two classification weights, five
ink-efficiency weights, one discriminator weight). Runs execute in a small
process pool (default 2 workers, one BLAS thread each), are resumable (a
finished run's JSON is its marker), and land under artifacts/runs/<slug>/.
Finally writes artifacts/acceptance_summary.json plus the results CSV and
sample grids for the settings trained here.

Total cost is roughly 10 CPU-hours; with the default two workers about five
wall-clock hours.

Usage: python scripts/run_acceptance.py [--workers 2] [--data-dir data/mnist]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
ARTIFACTS = REPO / "artifacts"
RUNS_DIR = ARTIFACTS / "runs"

# weight quadruples (alpha_re, alpha_cl, alpha_ef, alpha_d) the acceptance
# criteria exercise; 5 seeds each per the published protocol
ACCEPTANCE_SETTINGS = [
    (32.0, 0.0, 0.0, 0.0),
    (32.0, 0.03, 0.0, 0.0),
    (32.0, 0.24, 0.0, 0.0),
    (32.0, 0.0, 1.0, 0.0),
    (32.0, 0.0, 4.0, 0.0),
    (32.0, 0.0, 8.0, 0.0),
    (32.0, 0.0, 16.0, 0.0),
    (32.0, 0.0, 32.0, 0.0),
    (32.0, 0.0, 0.0, 0.64),
]
SEEDS = [0, 1, 2, 3, 4]


def slug(weights) -> str:
    re_, cl, ef, d = weights
    return f"re{re_:g}_cl{cl:g}_ef{ef:g}_d{d:g}"


def ensure_classifier(data_dir: str, env: dict) -> Path:
    ckpt = ARTIFACTS / "classifier.ckpt"
    if ckpt.exists() and (ARTIFACTS / "classifier_meta.json").exists():
        return ckpt
    print("training classifier...", flush=True)
    script = (
        "import json, time\n"
        "from digit_coach.data import load_mnist\n"
        "from digit_coach.persistence import save_checkpoint\n"
        "from digit_coach.training import (CLASSIFIER_CALIBRATED_STEPS, TrainConfig,\n"
        "                                  train_classifier)\n"
        f"train, test = load_mnist({data_dir!r})\n"
        "t0 = time.time()\n"
        "config = TrainConfig(seed=0, max_steps=CLASSIFIER_CALIBRATED_STEPS)\n"
        "model, acc = train_classifier(train, test, config)\n"
        "duration = time.time() - t0\n"
        f"checksum = save_checkpoint(model, {str(ckpt)!r}, config=config)\n"
        "meta = {'test_accuracy': acc, 'steps': CLASSIFIER_CALIBRATED_STEPS,\n"
        "        'seed': 0, 'checksum': checksum, 'duration_seconds': duration}\n"
        f"open({str(ARTIFACTS / 'classifier_meta.json')!r}, 'w').write(\n"
        "    json.dumps(meta, indent=2, sort_keys=True))\n"
        "print(json.dumps(meta))\n"
    )
    subprocess.run([sys.executable, "-c", script], check=True, env=env, cwd=REPO)
    return ckpt


def pending_jobs() -> list[tuple[tuple, int]]:
    jobs = []
    for weights in ACCEPTANCE_SETTINGS:
        for seed in SEEDS:
            marker = RUNS_DIR / slug(weights) / f"run_seed{seed}.json"
            if not marker.exists():
                jobs.append((weights, seed))
    return jobs


def launch(weights, seed: int, data_dir: str, classifier: Path, env: dict):
    out_dir = RUNS_DIR / slug(weights)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = open(out_dir / f"train_seed{seed}.log", "w")
    re_, cl, ef, d = weights
    cmd = [sys.executable, "-m", "digit_coach.cli", "train-coach",
           "--alpha-re", str(re_), "--alpha-cl", str(cl),
           "--alpha-ef", str(ef), "--alpha-d", str(d),
           "--seed", str(seed), "--runs", "1",
           "--out", str(out_dir), "--data-dir", data_dir,
           "--classifier", str(classifier)]
    return subprocess.Popen(cmd, stdout=log, stderr=subprocess.STDOUT, env=env, cwd=REPO)


def collect_summary() -> dict:
    summary = {"settings": {}}
    for weights in ACCEPTANCE_SETTINGS:
        name = slug(weights)
        runs = []
        for seed in SEEDS:
            marker = RUNS_DIR / name / f"run_seed{seed}.json"
            if marker.exists():
                rec = json.loads(marker.read_text())
                runs.append({"seed": seed,
                             "pipeline_accuracy": rec["pipeline_accuracy"],
                             "mean_l_re": rec["mean_l_re"],
                             "mean_l_ef": rec["mean_l_ef"],
                             "checkpoint": rec["checkpoint"]})
        summary["settings"][name] = {"weights": list(weights), "runs": runs}
    return summary


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--data-dir", default="data/mnist")
    args = ap.parse_args()

    env = dict(os.environ)
    env.setdefault("OPENBLAS_NUM_THREADS", "1")
    env.setdefault("OMP_NUM_THREADS", "1")
    src = str(REPO / "src")
    env["PYTHONPATH"] = src + os.pathsep + env.get("PYTHONPATH", "")

    ARTIFACTS.mkdir(exist_ok=True)
    classifier = ensure_classifier(args.data_dir, env)

    jobs = pending_jobs()
    print(f"{len(jobs)} coach runs pending", flush=True)
    running: list[tuple[subprocess.Popen, tuple, int, float]] = []
    failures = []
    while jobs or running:
        while jobs and len(running) < args.workers:
            weights, seed = jobs.pop(0)
            proc = launch(weights, seed, args.data_dir, classifier, env)
            running.append((proc, weights, seed, time.time()))
            print(f"started {slug(weights)} seed {seed}", flush=True)
        time.sleep(5)
        still = []
        for proc, weights, seed, t0 in running:
            code = proc.poll()
            if code is None:
                still.append((proc, weights, seed, t0))
                continue
            mins = (time.time() - t0) / 60
            if code == 0:
                print(f"finished {slug(weights)} seed {seed} in {mins:.1f} min", flush=True)
            else:
                failures.append((slug(weights), seed, code))
                print(f"FAILED {slug(weights)} seed {seed} (exit {code})", flush=True)
        running = still

    summary = collect_summary()
    (ARTIFACTS / "acceptance_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True))
    render_sample_grids(args.data_dir)
    write_results_csv()
    print(f"summary written; failures: {failures or 'none'}", flush=True)
    return 1 if failures else 0


def render_sample_grids(data_dir: str):
    """Per-setting proposal grids for a fixed 20-digit panel (plus originals)."""
    from digit_coach.data import load_mnist
    from digit_coach.experiments import figure_panel_indices, render_grid
    from digit_coach.persistence import load_checkpoint

    _, test = load_mnist(data_dir)
    panel = figure_panel_indices(test)
    images = test.images[panel]
    labels = test.labels[panel]
    grids = ARTIFACTS / "grids"
    grids.mkdir(exist_ok=True)
    render_grid(list(images), 10, grids / "grid_originals.png")
    for weights in ACCEPTANCE_SETTINGS:
        ckpt = RUNS_DIR / slug(weights) / "coach_seed0.ckpt"
        if not ckpt.exists():
            continue
        coach = load_checkpoint(ckpt)
        proposals = coach.propose(images.reshape(-1, 1, 28, 28), labels)
        render_grid(list(proposals), 10, grids / f"grid_{slug(weights)}.png")
    print(f"grids rendered under {grids}", flush=True)


def write_results_csv():
    """Ablation-style CSV over the acceptance settings."""
    from digit_coach.experiments import build_result, summarize
    from digit_coach.losses import LossWeights
    from digit_coach.training import EvalMetrics

    summary = json.loads((ARTIFACTS / "acceptance_summary.json").read_text())
    per_setting = {}
    for weights in ACCEPTANCE_SETTINGS:
        runs = summary["settings"][slug(weights)]["runs"]
        per_setting[weights] = [
            EvalMetrics(pipeline_accuracy=r["pipeline_accuracy"],
                        mean_l_re=r["mean_l_re"], mean_l_ef=r["mean_l_ef"])
            for r in runs]
    baseline = per_setting[(32.0, 0.0, 0.0, 0.0)]
    results = [build_result(LossWeights(*w), per_setting[w], [], baseline)
               for w in ACCEPTANCE_SETTINGS]
    summarize(results, ARTIFACTS / "results.csv")
    print(f"wrote {ARTIFACTS / 'results.csv'}", flush=True)


if __name__ == "__main__":
    sys.exit(main())
