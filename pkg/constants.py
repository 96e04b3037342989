"""Constants for the project."""

WEEKS_PER_YEAR = 52.0

# Panel file schema, in file order.
PANEL_COLUMNS = (
    "company_name",
    "company_type",
    "investment_type",
    "investment_amount_musd",
    "total_capital_raised_musd",
    "round_name",
    "round_number",
    "weeks_since_first",
    "weeks_since_last",
    "event_occurred",
    "has_trends_data",
    "trends_delta_pct",
    "has_traffic_data",
    "traffic_delta_pct",
)

# Design column names, as printed in the fit tables.
COL_LOG_CAPITAL = "Log(totalCapital)"
COL_ROUND_NUMBER = "roundNumber"
COL_WEEKS_SINCE_FIRST = "weeksSinceFirst"
COL_TRAFFIC_DELTA = "trafficDelta"
COL_HAS_TRENDS = "hasTrendsData"
COL_TRENDS_DELTA = "trendsDelta"
COL_TRENDS_SIGN = "trendsDeltaSign"
COL_COMPANY_EP = "companyType=EP"
COL_COMPANY_PL = "companyType=PL"
COL_HAS_TRAFFIC = "hasTrafficData"
COL_LOG_AMOUNT = "Log(investmentAmount)"

# Time scales available to time-interaction columns.
SCALE_YEARS_SINCE_FIRST = "yearsSinceFirst"
SCALE_WEEKS_SINCE_FIRST = "weeksSinceFirst"
SCALE_WEEKS_SINCE_LAST = "weeksSinceLast"

# The two interactions that turn the initial risk-oblivious model into the refit one.
DEFAULT_TIME_INTERACTIONS = (
    (COL_ROUND_NUMBER, SCALE_YEARS_SINCE_FIRST),
    (COL_WEEKS_SINCE_FIRST, SCALE_WEEKS_SINCE_LAST),
)

FIT_TABLE_COLUMNS = ("Covariate name", "Beta", "Exp(beta)", "Se(coef)", "Z", "Pr(>|z|)")
LR_TEST_LABEL = "Likelihood ratio test"
WALD_TEST_LABEL = "Wald test"
SCORE_TEST_LABEL = "Score (logrank) test"

FOOTER_NOTES = (
    "Log(totalCapital) = ln(1 + total capital raised in $M); the +1 is a one-million-dollar offset",
    "trendsDeltaSign is coded 1 when trendsDelta > 0, else 0 (the variable is otherwise undefined)",
)

HUMAN_DIGITS = 6
FULL_DIGITS = 15
