DIRICHLET_INTERVAL = "dirichlet_interval"
ANHARMONIC = "anharmonic"
CUSTOM = "custom"

# 스펙트럼 출처 태그
FAMILY_TAGS = [
    (DIRICHLET_INTERVAL, "-d²/dx² on (0, π), Dirichlet"),
    (ANHARMONIC, "power-law spectrum λ_n ∝ n"),
    (CUSTOM, "user supplied eigenvalues"),
]
