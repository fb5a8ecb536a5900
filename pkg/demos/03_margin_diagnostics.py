"""The surrogate margin in action.

Runs adagrad flow on the isotropic dataset and tabulates the normalized
margin gamma, the surrogate margin gamma_tilde = g(log(1/loss))/rho^L,
the floor exp(-1/2)*gamma_tilde(t1), and the angle diagnostics. The two
margins converge to the same limit; the surrogate never dips below the
floor after t1.
"""

import math

from marginflow.runner import run_artifacts
from marginflow.standard import standard_config

art = run_artifacts(standard_config("linear2d_iso", "adagrad"))
t1 = art.t1_time
anchor = art.frames[art.t1_index].gamma_tilde
floor = math.exp(-0.5) * anchor

print(f"t1 = {t1:.3g}   gamma_tilde(t1) = {anchor:.4f}   floor = {floor:.4f}")
print(f"{'t':>10} {'gamma':>9} {'g_tilde':>9} {'rho/||v||':>9} {'cos':>7} {'zeta':>7}")
for fr in art.frames[art.t1_index::30] + [art.frames[-1]]:
    print(f"{fr.t:10.3g} {fr.gamma:9.4f} {fr.gamma_tilde:9.4f} "
          f"{fr.rho / fr.norm_v:9.5f} {fr.cos_theta:7.4f} {fr.zeta:7.4f}")

final = art.frames[-1]
print("\nfinal |gamma_tilde/gamma - 1| =", abs(final.gamma_tilde / final.gamma - 1.0))
print("surrogate floor respected:",
      all(fr.gamma_tilde >= floor - 1e-9
          for fr in art.frames[art.t1_index:] if fr.gamma_tilde is not None))
print("curve length zeta grew by only",
      f"{art.frames[-1].zeta - art.frames[art.t1_index].zeta:.4f}",
      "after t1: the direction has essentially settled.")
