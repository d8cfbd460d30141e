"""Between/within mean distance ratio of three fixed clusters as d grows."""
import argparse

from graphclust.simlab import equidistance_ratios


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dims", default="2,10,50,100,200,400,1000")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    dims = [int(x) for x in args.dims.split(",")]
    print("d,ratio")
    for d, r in zip(dims, equidistance_ratios(dims, seed=args.seed)):
        print(f"{d},{r:.4f}")


if __name__ == "__main__":
    main()
