"""Derivation of all integer parameters of the retrieval scheme.

For M records stored on N servers under an [N,K] MDS code, the scheme
splits servers into two symmetry groups: the first N-K servers each
provide alpha_j sums of every j-record type, the last K servers beta_j.
With d = gcd(N,K), n = N/d, k = K/d the per-group counts satisfy the
coupled recurrences

    beta_{j+1} = (n-k)/k * alpha_j
    alpha_{j+1} = beta_j + (n-2k)/k * alpha_j

and the admissible integer solutions are pinned by one seed per regime:
alpha_1 = 0, beta_1 = k^(M-1) when N >= 2K, and alpha_M = 0,
beta_M = (n-k)^(M-1) when N < 2K. Everything else (sub-packetization,
download size, access count, capacity) follows in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, gcd


class UnsupportedRegime(ValueError):
    """Parameters outside the nontrivial range N > K >= 1, M >= 2."""


@dataclass(frozen=True)
class SchemeParams:
    """All derived integers for one (M, N, K) instance.

    alpha[j-1] / beta[j-1] are the per-type counts of j-record sums at the
    first N-K and the last K servers respectively. Instances are plain
    holders; validity is established by derive_params and can be re-checked
    with verify_constraints.
    """

    M: int
    N: int
    K: int
    d: int
    n: int
    k: int
    Ltilde: int
    L: int
    alpha: tuple[int, ...]
    beta: tuple[int, ...]
    D: int
    omega: int
    capacity: Fraction

    def gamma(self, server: int, j: int) -> int:
        """Count of j-record sums of each type at the given server (1-based)."""
        if not 1 <= server <= self.N:
            raise ValueError(f"server {server} out of range")
        if not 1 <= j <= self.M:
            raise ValueError(f"sum size {j} out of range")
        return self.alpha[j - 1] if server <= self.N - self.K else self.beta[j - 1]

    def pool_size(self, j: int) -> int:
        """Total number of distinct j-record sums of one type across all servers."""
        total = (self.N - self.K) * self.alpha[j - 1] + self.K * self.beta[j - 1]
        q, r = divmod(total, self.K)
        if r:
            raise ArithmeticError("pool size is not integral")
        return q

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "N": self.N,
            "K": self.K,
            "d": self.d,
            "n": self.n,
            "k": self.k,
            "Ltilde": self.Ltilde,
            "L": self.L,
            "alpha": list(self.alpha),
            "beta": list(self.beta),
            "D": self.D,
            "omega": self.omega,
            "capacity": [self.capacity.numerator, self.capacity.denominator],
            "rate": [self.L, self.D],
        }


def capacity(M: int, N: int, K: int) -> Fraction:
    """Best achievable ratio of record size to download size.

    Equals (1 + K/N + ... + (K/N)^(M-1))^(-1), returned exactly.
    """
    if M < 1 or K < 1 or N < K:
        raise UnsupportedRegime(f"capacity undefined for M={M}, N={N}, K={K}")
    series = sum(Fraction(K, N) ** i for i in range(M))
    return 1 / series


def _closed_form(M: int, N: int, K: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    d = gcd(N, K)
    n, k = N // d, K // d
    alphas = []
    betas = []
    for j in range(1, M + 1):
        if N >= 2 * K:
            a = (Fraction(n - k) ** (j - 1) - Fraction(-k) ** (j - 1)) / n * k ** (M - j + 1)
            b = (
                (Fraction(n - k) ** (j - 2) - Fraction(-k) ** (j - 2))
                / n
                * (n - k)
                * k ** (M - j + 1)
            )
        else:
            a = (Fraction(k) ** (M - j) - Fraction(k - n) ** (M - j)) / n * k * (n - k) ** (j - 1)
            b = (Fraction(k) ** (M - j + 1) - Fraction(k - n) ** (M - j + 1)) / n * (n - k) ** (
                j - 1
            )
        if a.denominator != 1 or b.denominator != 1 or a < 0 or b < 0:
            raise ArithmeticError(f"non-integral counts at j={j} for ({M},{N},{K})")
        alphas.append(int(a))
        betas.append(int(b))
    return tuple(alphas), tuple(betas)


def derive_params(M: int, N: int, K: int) -> SchemeParams:
    """Derive the full parameter set for an (M, N, K) instance.

    Raises UnsupportedRegime outside M >= 2, N > K >= 1: with a single
    record there is nothing to hide, and with N <= K no private retrieval
    beats downloading everything.
    """
    if M < 2:
        raise UnsupportedRegime(f"need at least 2 records, got M={M}")
    if K < 1 or N <= K:
        raise UnsupportedRegime(f"need N > K >= 1, got N={N}, K={K}")
    d = gcd(N, K)
    n, k = N // d, K // d
    alpha, beta = _closed_form(M, N, K)
    Ltilde = n ** (M - 1)
    L = K * Ltilde
    D = K * (n**M - k**M) // (n - k)
    omega = M * K * Ltilde
    return SchemeParams(
        M=M,
        N=N,
        K=K,
        d=d,
        n=n,
        k=k,
        Ltilde=Ltilde,
        L=L,
        alpha=alpha,
        beta=beta,
        D=D,
        omega=omega,
        capacity=capacity(M, N, K),
    )


@dataclass
class ConstraintReport:
    """Pass/fail outcome for each structural constraint on a parameter set."""

    checks: dict[str, bool]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [name for name, passed in self.checks.items() if not passed]


def verify_constraints(sp: SchemeParams) -> ConstraintReport:
    """Re-check the count system on a (possibly hand-built) SchemeParams."""
    M, N, K, n, k = sp.M, sp.N, sp.K, sp.n, sp.k
    a, b = sp.alpha, sp.beta

    integral = (
        len(a) == M
        and len(b) == M
        and all(isinstance(x, int) and x >= 0 for x in a)
        and all(isinstance(x, int) and x >= 0 for x in b)
    )

    c1 = all(((N - K) * a[j] + K * b[j]) % K == 0 for j in range(M))

    # recurrences, cross-multiplied to stay in integers
    g1 = all(
        k * b[j + 1] == (n - k) * a[j] and k * a[j + 1] == k * b[j] + (n - 2 * k) * a[j]
        for j in range(M - 1)
    )

    div_last = ((n - k) * a[M - 1]) % k == 0

    c2 = True
    eqeq = True
    for j in range(M):
        total = (N - K) * a[j] + K * b[j]
        if total % K:
            c2 = eqeq = False
            continue
        pool = total // K
        if pool != (n - k) ** j * k ** (M - 1 - j):
            eqeq = False
        if j < M - 1 and (a[j + 1] + a[j] != pool or b[j + 1] + b[j] != pool):
            c2 = False

    return ConstraintReport(
        checks={
            "integral_nonnegative": integral,
            "C1": c1,
            "G1": g1 and div_last and integral,
            "C2": c2,
            "eqeq": eqeq,
            "div_alpha_last": div_last,
        }
    )
