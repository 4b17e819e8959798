"""A tour of the marginal-hierarchy calculus for two mixtures.

Prints the norm-bound constants and the convergence horizon, shows the
finite-size coefficient approaching 1 like 1/N, and traces the integral
remainder factor that controls the term-by-term expansion inside the
horizon.
"""

from kacmix import (
    coeff_leading,
    duhamel_remainder_factor,
    hierarchy_constants,
    remainder_bound,
)


def show_constants(title: str, M: int, betas, epsilon: float) -> None:
    hc = hierarchy_constants(M=M, betas=betas, epsilon=epsilon)
    print(f"{title}: M={M}, beta={betas}, epsilon={epsilon}")
    print(f"  {'k':>2} {'R_k':>8} {'rho_k':>8} {'C_k':>8}")
    for k in range(hc.M):
        print(f"  {k:>2} {hc.R[k]:>8.4f} {hc.rho[k]:>8.4f} {hc.C[k]:>8.4f}")
    print(
        f"  T_star={hc.T_star:.6f}, T_max={hc.T_max:.6f}, "
        f"contraction factors at T=T_max/2: {hc.theta1:.4f}, {hc.theta2:.4f}\n"
    )


def main() -> None:
    show_constants("pair/triple mixture", 2, (0.5, 0.5), 0.0)
    show_constants("triple-heavy mixture", 3, (0.2, 0.3, 0.5), 0.25)

    print("finite-size coefficient lambda(N, s, k): gap to 1 decays like 1/N")
    print(f"  {'N':>7} {'s=2,k=1':>12} {'s=5,k=2':>12}")
    for n in (10, 100, 1000, 10_000, 100_000):
        print(
            f"  {n:>7} {abs(coeff_leading(n, 2, 1) - 1.0):>12.3e}"
            f" {abs(coeff_leading(n, 5, 2) - 1.0):>12.3e}"
        )

    print("\nfinite-N remainder bound C_k s^2 / N (M=2, beta=(1/2,1/2), eps=1/2, s=4, k=0):")
    for n in (100, 1000, 10_000):
        print(f"  N={n:>6}: {remainder_bound(n, 4, 0, 2, (0.5, 0.5), 0.5):.4e}")

    hc = hierarchy_constants(M=2, betas=(0.5, 0.5), epsilon=0.0)
    T = hc.T_max / 2.0
    print("\nintegral remainder factor at T = T_max/2 (geometric decay in the order n):")
    print(f"  {'n':>4} {'s=1':>10} {'s=2':>10} {'s=4':>10}")
    for n in (1, 5, 10, 20, 40, 60):
        vals = [duhamel_remainder_factor(s, n, m=1, T=T, T_star=hc.T_star) for s in (1, 2, 4)]
        print(f"  {n:>4} {vals[0]:>10.2e} {vals[1]:>10.2e} {vals[2]:>10.2e}")


if __name__ == "__main__":
    main()
