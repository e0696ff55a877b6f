"""How far can distilled continuous-variable links carry entanglement?

Sweeps the initial squeezing for chains of 1, 2, 4, 8 and 16 links and
prints the maximum span at which the Duan witness still certifies
entanglement, next to the direct-transmission bound.

Run:  python demos/repeater_reach.py
"""

from cvdistill import repeater


def main():
    r_grid = [round(0.1 * j, 10) for j in range(1, 21)]
    print(f"direct-transmission asymptote: {repeater.direct_lmax_limit():.1f} km\n")

    header = f"{'r':>4s} {'direct':>9s}" + "".join(f"{'m=' + str(2**k):>9s}" for k in range(5))
    print(header)
    for r in r_grid:
        cells = [f"{r:4.1f}", f"{repeater.direct_lmax(r):9.1f}"]
        for k in range(5):
            res = repeater.max_distance(r, k, "i")
            cells.append(f"{res.length_km:9.1f}")
        print(" ".join(cells))

    print("\nbest span per chain size (variant i vs variant ii, km):")
    for k in range(5):
        best_i = max(repeater.max_distance(r, k, "i").length_km for r in r_grid)
        best_ii = max(repeater.max_distance(r, k, "ii").length_km for r in r_grid)
        print(f"  m = {2**k:2d}: {best_i:8.1f}  vs  {best_ii:8.1f} with station loss")


if __name__ == "__main__":
    main()
