"""Constants for the EUREKA feature ranking toolkit."""

# Data
DEFAULT_MISSING_TOKENS = ("", "?", "NA")
DEFAULT_TEST_FRACTION = 0.2
DEFAULT_VALIDATION_FRACTION = 0.25
KIND_NUMERIC = "numeric"
KIND_CATEGORICAL = "categorical"

# Judge
JUDGE_MODE_LIVE = "live"
JUDGE_MODE_MOCK = "mock"
SOURCE_LIVE = "live"
SOURCE_MOCK = "mock"
SOURCE_CACHE = "cache"
DEFAULT_MODEL_ID = "gpt-5-nano"
DEFAULT_API_KEY_ENV = "OPENAI_API_KEY"  # nosec B105
DEFAULT_MAX_IN_FLIGHT = 8
DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_BACKOFF_SECONDS = 1.0
DEFAULT_REQUEST_TIMEOUT = 60.0
DEFAULT_DIRECT_NOISE = 0.0
PROMPT_TEMPLATE_VERSION = "pairwise-v1"

SYSTEM_PROMPT = (
    "You are helping to discover interesting classification rules. "
    "Task: {task_description} The label to predict is {label_name}."
)
PAIRWISE_PROMPT = (
    "Feature A: {name_a} ({description_a})\n"
    "Feature B: {name_b} ({description_b})\n\n"
    "If one could predict {label_name} only from {name_a} and only from "
    "{name_b}, which prediction rule would be more interesting? "
    "Answer with exactly A or B."
)
PAIRWISE_REPROMPT = "Answer with exactly one letter: A or B."
DIRECT_PROMPT = (
    "Here are the candidate features for predicting {label_name}:\n"
    "{feature_lines}\n\n"
    "Rank ALL of these features from the most interesting to the least "
    "interesting prediction rule, where a rule predicts {label_name} from that "
    "feature alone. Reply with the feature names only, one per line, most "
    "interesting first."
)
DIRECT_REPROMPT = (
    "Your ranking must list every one of these features exactly once, one "
    "name per line: {names}"
)

# Ranking
DEFAULT_COMPARISONS = 4096
DEFAULT_ACTIVE_DELTA = 0.1
DEFAULT_BENCH_NS = (8, 16, 32, 64, 128, 256)
DEFAULT_TRUTH_COMPARISONS = 4096
DEFAULT_BENCH_REPEATS = 50
DEFAULT_STABILITY_RUNS = 20
METHOD_PAIRWISE = "pairwise"
METHOD_ACTIVE = "active"
METHOD_DIRECT = "direct"
METHOD_COUNTING = "counting"
TRUTH_ANALYTIC = "analytic"
TRUTH_SAMPLED = "sampled"

# GLM
DEFAULT_L2_LAMBDA = 1e-4
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 100
IRLS_RIDGE_FLOOR = 1e-10
MAX_STEP_HALVINGS = 40
DEFAULT_GL_TOL = 1e-6
DEFAULT_GL_MAX_ITER = 5000

# Selection
DEFAULT_ALPHA = 0.05
DEFAULT_LR_BASELINE_LAMBDA = 1.0
DEFAULT_GL_PATH_POINTS = 32
DEFAULT_GL_PATH_RATIO = 1e-3

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_JUDGE_ERROR = 4

# Output artifacts
RANKING_FILE = "ranking.json"
ESTIMATE_FILE = "borda_estimate.json"
TRANSCRIPT_FILE = "transcript.jsonl"
RESOLVED_CONFIG_FILE = "config.resolved.json"
SWEEP_REPORT_FILE = "sweep_report.json"
SWEEP_CSV_FILE = "sweep_curve.csv"
RULES_FILE = "rules.txt"
MODEL_FILE = "model.json"
BASELINES_FILE = "baselines.csv"
BASELINES_JSON_FILE = "baselines.json"
RANKBENCH_CSV_FILE = "rankbench.csv"
RANKBENCH_SUMMARY_FILE = "rankbench_summary.json"
STABILITY_CSV_FILE = "stability.csv"
STABILITY_SUMMARY_FILE = "stability_summary.json"

# Task descriptions of the six benchmark datasets
TASK_PRESETS = {
    "occupancy": "Predict whether a room is occupied.",
    "twin_papers": "Predict which of two similar papers is cited more.",
    "mammographic_mass": "Predict whether a mammographic mass is benign or malignant.",
    "breast_cancer_wisconsin": "Predict whether a breast tumor is benign or malignant.",
    "adult": "Predict whether a person's annual income exceeds $50k.",
    "website_phishing": "Predict whether a website is a phishing site.",
}
