"""Independent arbitrary-precision evaluation of the amplification formulas.

Regenerate the frozen table with:
    python3 crates/core/tests/oracle/amplification_oracle.py > crates/core/tests/amplification_oracle_values.in
"""
import random

import mpmath as mp

mp.mp.dps = 60
rng = random.Random(20240611)


def f(x):
    return mp.nstr(x, 25, strip_zeros=False, min_fixed=-1, max_fixed=-1) if x is not None else "f64::NAN"


print("// generated by oracle/amplification_oracle.py; do not edit")
print("[")
for _ in range(20):
    eps_l = mp.mpf(rng.uniform(0.5, 6.0))
    eps_c = mp.mpf(rng.uniform(0.1, 1.0))
    n = rng.randint(10**4, 10**7)
    k = rng.randint(2, 200)
    delta = mp.mpf(10) ** (-rng.randint(6, 12))
    n_r = rng.randint(1, 10**5)
    # floats as Rust will see them
    eps_l = mp.mpf(float(eps_l))
    eps_c = mp.mpf(float(eps_c))
    A = 14 * mp.log(2 / delta)
    amp_k = mp.sqrt(A * (mp.e**eps_l + k - 1) / (n - 1))
    amp_ue = 2 * mp.sqrt(14 * mp.log(4 / delta) * (mp.e**(eps_l / 2) + 1) / (n - 1))
    m = eps_c**2 * (n - 1) / A
    m_ue = eps_c**2 * (n - 1) / (56 * mp.log(4 / delta))
    var_grr = (m - 1) / (n * (m - k) ** 2) if m > k else None
    var_ue = (m_ue - 1) / (n * (m_ue - 2) ** 2) if m_ue > 2 else None
    var_solh = m**2 / (n * (m - k) ** 2 * (k - 1)) if m > k else None
    inv = mp.log(m - k + 1) if m - k + 1 > 1 else None
    eps_s = mp.sqrt(A * k / n_r)
    peos_c = mp.sqrt(A / ((n - 1) / (mp.e**eps_l + k - 1) + mp.mpf(n_r) / k))
    small_budget = mp.sqrt(144 * mp.log(1 / delta) * eps_l**2 / n)
    binary_rr = mp.sqrt(32 * mp.log(4 / delta) * (mp.e**eps_l + 1) / n)
    print(
        "    OraclePoint { "
        f"eps_l: {float(eps_l)!r}, eps_c: {float(eps_c)!r}, n: {n}, k: {k}, delta: {float(delta)!r}, n_r: {n_r}, "
        f"amplify_k: {f(amp_k)}, amplify_ue: {f(amp_ue)}, var_grr: {f(var_grr)}, var_ue: {f(var_ue)}, "
        f"var_solh: {f(var_solh)}, invert_k: {f(inv)}, peos_eps_s: {f(eps_s)}, peos_eps_c: {f(peos_c)}, "
        f"small_budget: {f(small_budget)}, binary_rr: {f(binary_rr)} }},"
    )
print("]")
