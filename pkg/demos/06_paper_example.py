"""Side-by-side comparison with the published worked example.

Equivalent to ``qhamid paper``; lines marked FAIL are published numbers this
implementation does not reproduce (the README explains why).
"""
from qhamid.golden import golden_lines, run_paper_scenario

lines = golden_lines(run_paper_scenario())
for line in lines:
    print(line.format())
print(f"{sum(l.passed for l in lines)}/{len(lines)} lines pass")
