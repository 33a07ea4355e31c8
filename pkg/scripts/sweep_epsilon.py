"""Privacy-utility characterization: attribute inference accuracy under
planar-Laplace noise with venue snapping, swept over epsilon.

Usage: python scripts/sweep_epsilon.py [--seeds 5] [--radius 600]
Prints one table row per epsilon; smaller epsilon means more noise.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from checkin_advisor.mnb import predict_mnb, train_mnb
from checkin_advisor.privacy import ObfuscationParams, obfuscate_trace
from checkin_advisor.trace import (
    SynthConfig,
    Trace,
    corpus_from_records,
    synth_corpus,
    synth_venue_positions,
)


def run_seed(seed: int, eps_grid, radius: float) -> dict[float, float]:
    config = SynthConfig(m=2, users_per_class=15, checkins_per_user=30,
                         vocab_size=25, concentration=0.05)
    corpus, truth = synth_corpus(config, seed)
    positions = synth_venue_positions(config)
    by_user: dict[str, list] = {}
    for r in corpus.records:
        by_user.setdefault(r.checkin.pseudonym, []).append(r)
    train_users = [u for u in by_user if int(u[1:]) % 3 != 0]
    test_users = [u for u in by_user if int(u[1:]) % 3 == 0]
    model = train_mnb(
        corpus_from_records(
            corpus.schema,
            [r for u in train_users for r in by_user[u]],
            corpus.granularity,
        )
    )
    rng = np.random.default_rng(10_000 + seed)
    out = {}
    for eps in eps_grid:
        params = ObfuscationParams(epsilon=eps, snap="nearest_known_venue",
                                   snap_radius_m=radius)
        hits = total = 0
        for u in test_users:
            recs = by_user[u]
            for start in range(0, len(recs), 5):
                trace = Trace(
                    checkins=tuple(r.checkin for r in recs[start:start + 5]),
                    pseudonym=u,
                )
                noised = obfuscate_trace(trace, params, venue_index=positions, rng=rng)
                hits += int(predict_mnb(model, noised).predicted == truth[u])
                total += 1
        out[eps] = hits / total
    return out


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--radius", type=float, default=600.0)
    args = parser.parse_args()

    eps_grid = (10.0, 1.0, 0.1, 0.01, 0.003, 0.001)
    results = [run_seed(s, eps_grid, args.radius) for s in range(args.seeds)]

    print(f"{'epsilon (1/m)':>14} {'mean displ (m)':>15} {'accuracy':>9} {'std':>7}")
    for eps in eps_grid:
        accs = [r[eps] for r in results]
        print(f"{eps:>14g} {2.0 / eps:>15.1f} {np.mean(accs):>9.3f} {np.std(accs):>7.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
