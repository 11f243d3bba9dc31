"""Print the star-network persistency table for the four k = 1 preset cases,
with S(n) around each crossing."""
import argparse

from starnoise.persistency import DEFAULT_CAP, PartialNoiseCase, TABLE1_ROWS, limit_value, n_max, s_of_n


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cap", type=int, default=DEFAULT_CAP)
    args = parser.parse_args()

    print(f"{'case':<12}{'primed':<16}{'star n_max':>11}{'linear (ref)':>14}{'S(n_max)':>20}{'S(n_max+1)':>20}{'limit':>20}")
    for case_id, primed, linear in TABLE1_ROWS:
        case = PartialNoiseCase.preset(case_id, *primed)
        res = n_max(case, args.cap)
        at = s_of_n(case, res.n_max) if isinstance(res.n_max, int) else float("nan")
        after = s_of_n(case, res.n_max + 1) if isinstance(res.n_max, int) else float("nan")
        print(f"{case_id.value:<12}{str(primed):<16}{str(res.n_max):>11}{linear:>14}"
              f"{at:>20.15f}{after:>20.15f}{limit_value(case):>20.15f}")


if __name__ == "__main__":
    main()
