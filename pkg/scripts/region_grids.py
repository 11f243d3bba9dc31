"""Write every infinite-persistency region and every n_max staircase map to
a directory as CSV, ready for external plotting."""
import argparse
import pathlib

from starnoise.persistency import REGION_CASES, CaseId, grid_to_csv, nmax_map, region_scan


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("outdir", type=pathlib.Path)
    parser.add_argument("--res", type=int, default=None, help="override the default 200 (2D) / 60 (3D)")
    args = parser.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)

    for case in sorted(REGION_CASES):
        grid = region_scan(case, resolution=args.res)
        path = args.outdir / f"region_{case}.csv"
        path.write_text(grid_to_csv(grid), encoding="utf-8")
        print(f"{path}: {int(grid.values.sum())}/{grid.values.size} cells inside")
    for case_id in CaseId:
        grid = nmax_map(case_id, resolution=args.res)
        path = args.outdir / f"nmax_{case_id.value}.csv"
        path.write_text(grid_to_csv(grid), encoding="utf-8")
        finite = grid.values[grid.values > 0]
        top = int(finite.max()) if finite.size else 0
        print(f"{path}: {int((grid.values < 0).sum())} infinite cells, largest finite n_max {top}")


if __name__ == "__main__":
    main()
