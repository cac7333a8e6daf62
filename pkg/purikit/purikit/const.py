import math

# bundle container
BUNDLE_MAGIC = b"PKIT"
BUNDLE_VERSION = 1
SUPPORTED_BUNDLE_VERSIONS = (1,)

# payload dtype tags
DTYPE_F32 = 1
DTYPE_F64 = 2
DTYPE_I32 = 3
DTYPE_I64 = 4

# CIFAR-10 binary record: 1 label byte + 3 x 32 x 32 channel-planar pixels
CIFAR_SIDE = 32
CIFAR_CHANNELS = 3
CIFAR_RECORD_SIZE = 1 + CIFAR_SIDE * CIFAR_SIDE * CIFAR_CHANNELS
CIFAR_CLASS_COUNT = 10

# signal
DEFAULT_TIKHONOV_LAMBDA = 5.0

# sparse coding / dictionary learning
DEFAULT_ATOMS = 16
DEFAULT_FILTER_SIZE = 5
DEFAULT_LAMBDA_L1 = 0.05
DEFAULT_MAX_ITERS = 200
DEFAULT_TOL = 1e-4
RHO_ADAPT_FACTOR = 2.0
RHO_ADAPT_THRESHOLD = 10.0
ATOM_INIT_JITTER = 0.01
ATOM_INIT_MAX_CORRELATION = 0.9

# clustering
KMEANS_MAX_ITERS = 300
KMEANS_RESTARTS = 3
FLAT_CURVE_DROP = 0.05
DEFAULT_ELBOW_SHARPNESS = 5.0
SHRINKAGE_SCALE = 1e-6
PINV_CUTOFF = 1e-10
NEGATIVE_QF_TOLERANCE = 1e-10

# network
LATENT_DIM = 16
CONV1_FILTERS = 8
CONV2_FILTERS = LATENT_DIM
KERNEL_SIDE = 3
MOMENTUM = 0.9
MD_GRAD_FLOOR = 1e-8
INPUT_SCALE_FLOOR = 1e-12

# attacks
PGD_DEFAULT_EPSILON = 0.3
PGD_DEFAULT_STEPS = 10
BIM_DEFAULT_STEPS = 100
STEP_SIZE_FRACTION = 0.1
PGD_STEP_FACTOR = 2.5

# stage seed offsets, added to the run seed
SEED_OFFSET_DATASET = 0
SEED_OFFSET_TEST = 1
SEED_OFFSET_BASELINE = 101
SEED_OFFSET_SRD = 202
SEED_OFFSET_ROBUST = 303
SEED_OFFSET_ATTACK = 404
SEED_OFFSET_PURIFY = 505

DOUBLE_INFINITY = math.inf
OUT_ENV_VAR = "PURIKIT_OUT"
