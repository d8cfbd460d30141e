"""Q(k) profiles for three 2-D Gaussian clusters as the K-MST gets denser.

Prints the chosen k over replicates and one example profile per K. On a
single tree, convex clusters induce connected subtrees, so W = k - sum(1/n_i)
and the profile climbs with k; denser graphs remove that drift.
"""
import argparse
from collections import Counter

import numpy as np

from graphclust import KMeansConfig, build_kmst, estimate_k, kmeans, pairwise_distances


def three_gaussians(rng, n_per, d):
    centres = np.zeros((3, d))
    centres[1, :2] = 3.0
    centres[2, :2] = -3.0
    X = np.vstack([c + rng.standard_normal((n_per, d)) for c in centres])
    return X


def run(d, graph_k, reps, n_per, kmax):
    picks = Counter()
    example = None
    for seed in range(reps):
        X = three_gaussians(np.random.default_rng(seed), n_per, d)
        G = build_kmst(pairwise_distances(X), graph_k)
        prof = estimate_k(G, lambda k: kmeans(X, KMeansConfig(k, seed=seed * 100 + k)), 2, kmax)
        picks[prof.chosen_k] += 1
        example = example or prof
    return picks, example


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("--n-per", type=int, default=20)
    ap.add_argument("--kmax", type=int, default=9)
    args = ap.parse_args()
    for d, graph_k in ((2, 1), (2, 2), (2, 3), (2, 5), (2, 10)):
        picks, prof = run(d, graph_k, args.reps, args.n_per, args.kmax)
        print(f"d={d} {graph_k}-MST: chosen k {dict(sorted(picks.items()))}")
        print("  k   W        E        Q")
        for r in prof.records:
            print(f"  {r.k}  {r.W:7.3f}  {r.E:7.3f}  {r.Q:9.2f}")


if __name__ == "__main__":
    main()
