EXIT_SUCCESS = 0
EXIT_USAGE = 1
EXIT_DATA_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

# Vocabulary
UNK_TOKEN = "<unk>"
EOS_TOKEN = "<eos>"
UNK_ID = 0
EOS_ID = 1

# Tasks and attributes
TASK_AGREEMENT = "agreement"
TASK_GENDER = "gender"
SINGULAR = "singular"
PLURAL = "plural"
MALE = "male"
FEMALE = "female"

# Intervention modes
MODE_SINGLE = "single"
MODE_EVERY = "every"

# Task directions and the attribute whose form becomes the target token t
DIRECTION_ANY = "any"
DIRECTION_TO_SINGULAR = "to-singular"
DIRECTION_TO_PLURAL = "to-plural"
DIRECTION_TO_HE = "to-he"
DIRECTION_TO_SHE = "to-she"
DIRECTIONS = {
    DIRECTION_TO_SINGULAR: (TASK_AGREEMENT, SINGULAR),
    DIRECTION_TO_PLURAL: (TASK_AGREEMENT, PLURAL),
    DIRECTION_TO_HE: (TASK_GENDER, MALE),
    DIRECTION_TO_SHE: (TASK_GENDER, FEMALE),
}
# Searched one after the other when no direction is given; the first one is the default
TASK_DIRECTIONS = {
    TASK_AGREEMENT: (DIRECTION_TO_PLURAL, DIRECTION_TO_SINGULAR),
    TASK_GENDER: (DIRECTION_TO_SHE, DIRECTION_TO_HE),
}

# Estimators
ESTIMATOR_HARD_CONCRETE = "hard-concrete"
ESTIMATOR_REINFORCE = "reinforce"

# Numerics
PROBABILITY_FLOOR = 1e-9
HALF_OPEN_EPSILON = 2.0**-20

# File formats
CHECKPOINT_MAGIC = "UFCKPT"
CHECKPOINT_VERSION = 1
CORPUS_COLUMNS = ("tokens", "i", "n", "d", "t", "task", "attribute")
TRACE_COLUMNS = (
    "step",
    "token",
    "unit",
    "original",
    "altered",
    "p_d_original",
    "p_t_original",
    "p_d_altered",
    "p_t_altered",
)
