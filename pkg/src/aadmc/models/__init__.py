from .scenario import ScenarioParams, ScenarioError, parse_scenario_text, load_scenario, PAYOFF_KINDS, THETAS
from .simulate import PathBatch, simulate, iter_batches, tangent_coefficients, outer_normals, OUTER_STREAM, INNER_STREAM
from .payoffs import Payoff
from .pricing import (
    Estimate, mean_se, price_mc, discounted_payoffs, bs_closed_form, BlackScholes, malliavin_gamma,
    build_pricing_graph, pathwise_greeks, PathwiseGreeks,
)
