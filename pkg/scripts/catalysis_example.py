"""The smallest catalysis example: no submajorization, but a two-level catalyst works."""

from fractions import Fraction as F

from catalens import Spectrum, find_catalyst, pm_check, submajorizes, tensor

a = Spectrum((F(1, 2), F(1, 4), F(1, 4)))
b = Spectrum((F(2, 5), F(2, 5), F(1, 10), F(1, 10)))

plain = submajorizes(a, b)
print("a submajorizes b:", bool(plain), f"(first failing partial sum at k = {plain.index})")
print("power-mean check:", pm_check(a, b).verdict)

cert = find_catalyst(a, b)
print("catalyst:", ", ".join(str(v) for v in cert.c.values))
print("a ⊗ c:", ", ".join(str(v) for v in tensor(a, cert.c).values))
print("b ⊗ c:", ", ".join(str(v) for v in tensor(b, cert.c).values))
print("slack:", ", ".join(str(s) for s in cert.slack))
