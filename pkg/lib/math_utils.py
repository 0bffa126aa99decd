# standard library
from functools import lru_cache

# third-party libraries
from scipy.stats import t as student_distribution # type: ignore # pylance doesn't recognize scipy.stats.t


@lru_cache(10000)
def t_score_two_tailed(p: float = 0.95, dof: int = 1) -> float:
    """
    Answers the question: "How many standard errors from the estimate we have to span
    equally in both sides of a Student t distribution with `dof` degrees of freedom
    to cover `p` of its area"
    """
    return student_distribution.ppf(1-(1-p)/2, dof)
