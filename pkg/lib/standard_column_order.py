PROFILE_COLUMNS = [
    "Z",     #0
    "sigma", #1
    "omega", #2
    "rho",   #3
    "u",     #4
]

SCAN_R_COLUMNS = [
    "r",      #0
    "c_plus", #1
    "nu",     #2
]

SCAN_KAPPA_COLUMNS = [
    "r_n",     #0
    "kappa",   #1
    "c_minus", #2
]

ROOT_COLUMNS = [
    "n",                #0
    "r_n",              #1
    "nu",               #2
    "kappa_star",       #3
    "kappa_zero_found", #4
    "parity_expected",  #5
]

MODE_SCAN_COLUMNS = [
    "Omega",    #0
    "N",        #1
    "c_plus_N", #2
]

SPECTRUM_COLUMNS = [
    "Omega", #0
    "theta", #1
    "N",     #2
]

MODE_COLUMNS = [
    "Z",     #0
    "alpha", #1
    "beta",  #2
]

DIAGNOSTIC_COLUMNS = [
    "tau", "dtau", "perturbation",
    "max_rho_Z", "Z_max_rho_Z", "min_u_Z", "Z_min_u_Z",
    "max_rho_ZZ", "Z_max_rho_ZZ", "min_rho_ZZ", "Z_min_rho_ZZ",
    "max_u_ZZ", "Z_max_u_ZZ", "min_u_ZZ", "Z_min_u_ZZ",
    "delta_Z", "resolution",
]

SNAPSHOT_COLUMNS = [
    "tau", #0
    "Z",   #1
    "rho", #2
    "u",   #3
]

VERIFY_COLUMNS = [
    "tier",   #0
    "check",  #1
    "value",  #2
    "bound",  #3
    "passed", #4
]
