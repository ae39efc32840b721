"""Fisher-information rank tests and the two non-identifiable families.

    python demos/identifiability_checks.py
"""

import numpy as np

from isingmix import (check_assumptions, family_example2, family_example4,
                      local_identifiability_test, verify_equal_distribution)
from isingmix.identifiability import (example2_mask, example2_mixture, example4_mask,
                                      example4_mixture)

# two binary variables, interaction fixed, weights free
truth = example2_mixture(np.log(2.0), 0.4)
theta_alt, w_alt = family_example2(np.log(2.0), 0.4, 0.5)
alt = example2_mixture(theta_alt, w_alt)
print("two-variable family, max |dp|:", verify_equal_distribution(truth, alt))
print(local_identifiability_test(truth, example2_mask()))

# four variables, disjoint activation sets but free weights
truth = example4_mixture(1.0, -1.0, 0.4)
a1, a2, w = family_example4(1.0, -1.0, 0.4, 0.3)
print("four-variable family, max |dp|:", verify_equal_distribution(truth, example4_mixture(a1, a2, w)))
print(local_identifiability_test(truth, example4_mask()))
print(check_assumptions(truth, example4_mask()).to_dict())
