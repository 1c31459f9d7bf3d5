PARTITION = "partition"
DENSITY_MATRIX = "dm"
HUSIMI = "husimi"
PROOF_STEPS = "proofsteps"

# 캠페인 종류
CAMPAIGN_KINDS = [
    (PARTITION, "Z_λ/Z_0 against z_r"),
    (DENSITY_MATRIX, "k! T^{-k} Γ^(k) against γ^(k)"),
    (HUSIMI, "anti-Wick expectations against ∫ b dμ"),
    (PROOF_STEPS, "a-priori bounds and proof-step inequalities"),
]

# 결합 상수 규칙 λ(T)
INVERSE_TEMPERATURE = "inverse"
CONSTANT = "constant"

COUPLING_RULES = [
    (INVERSE_TEMPERATURE, "λ = value / T"),
    (CONSTANT, "λ = value"),
]

# 입자 수 상한 정책
FIXED = "fixed"
ADAPTIVE = "adaptive"

CUTOFF_POLICIES = [
    (FIXED, "fixed N_max"),
    (ADAPTIVE, "smallest N_max with free tail below the threshold"),
]

CONVENTIONS = [
    ("half", "F_NL = ½⟨u⊗u, w u⊗u⟩"),
    ("full", "F_NL = ⟨u⊗u, w u⊗u⟩"),
]

# the mean-field regime keeps λT of order one
MAX_COUPLING_PRODUCT = 100.0

# 저장용 seed는 signed 64-bit 범위
MAX_STORED_SEED = 2**63 - 1

# CSV 열 순서 (행 하나 = 온도 하나)
CSV_COLUMNS = [
    "temperature",
    "coupling",
    "n_max",
    "log_z_lambda",
    "log_z_free",
    "ratio",
    "z_r",
    "z_r_stderr",
    "distance",
    "distance_stderr",
    "tail_certificate",
    "passed",
]

# 비교 허용 오차
EXACT_TOL = 1e-10
BOUND_TOL = 1e-8
SIGMAS = 3.0
# truncated-vs-closed-form bias scales like N_max^k × tail
CLOSED_FORM_TOL = 1e-6

# 증명 단계 점검에서 쓰는 N^k 모멘트 차수 상한
MAX_MOMENT_ORDER = 4

# random state pairs / perturbations per entropy and variational check
BATTERY_DRAWS = 100
