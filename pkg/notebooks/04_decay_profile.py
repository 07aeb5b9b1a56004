# %% [markdown]
# # Decay of the lower-walk eigenvalues
#
# The one-step lower walk on level k has approximate eigenvalues that decay
# with the level index i.  With idealized parameters they equal the ratios
# of regularity constants `R(k-1,i)/R(k,i)`, which are `(k-i)/k` for
# simplicial complexes and `(q^(k-i) - 1)/(q^k - 1)` for q-analogs.

# %%
from eposet import qfamilies as qf
from eposet import spectral as spc
from eposet.poset import regularity_profile

simp = spc.EposetParams(tuple(qf.simplicial_limit_delta(i) for i in range(1, 4)))
qpar = spc.EposetParams(tuple(qf.qeposet_delta(i, 2) for i in range(1, 4)))
Rs = regularity_profile(qf.complete_complex(8, 4)[0]).R
Rq = regularity_profile(qf.grassmann_poset(2, 6, 4)[0]).R

print(" i   simplicial  (k-i)/k   q=2 eposet  (2^(k-i)-1)/(2^k-1)")
for a, b in zip(spc.decay_profile(simp, Rs, 4), spc.decay_profile(qpar, Rq, 4)):
    i = a["i"]
    print(f" {i}   {a['lambda']:.6f}    {(4 - i) / 4:.6f}  {b['lambda']:.6f}    {(2 ** (4 - i) - 1) / 15:.6f}")

# %% [markdown]
# On finite instances the same table is off by O(1/n); the gap shrinks
# along the complete-complex sweep.

# %%
for n in (8, 12, 16):
    P, m = qf.complete_complex(n, 3)
    pr = spc.estimate_eposet_params(P, m)
    gaps = [row["gap"] for row in spc.decay_profile(pr, regularity_profile(P).R, 3)]
    print(f"n={n:2d}: max gap {max(gaps):.4f}")
