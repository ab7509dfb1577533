# [GRID]
grid_count = 512
grid_length = 512 ** 0.5  # self-dual: L**2 == N gives dx == dxi
margin = 1 / 8  # decay statements are tested inside |x| <= L/2 * (1 - margin)

# [WINDOW]
window_kind = "gaussian"
window_params = {}

# [TEST SIGNAL]
signal_kind = "gaussian"
signal_params = {}
random_atoms = 6
random_radius = 3.0

# [LATTICE]
lattice_radius = 4.0  # 17 x 17 points at the default step
lattice_step = 0.5
symbol_lattice_x_radius = 1.0
symbol_lattice_xi_radius = 3.5
symbol_lattice_xi_step = 0.25
structure_lattice_radius = 6.5  # 27 x 27 points, fills the decay fit range
peak_iterations = 6  # Newton steps of the STFT peak refinement

# [DECAY FIT]
decay_shells = 48
decay_min_shells = 20
decay_min_radius = 3.0
decay_max_radius = 6.5
roundoff_floor = 1e-14
certificate_slack = 0.5

# [FRAMES]
frame_count = 64
frame_length = 8.0
frame_alpha = 0.5
frame_beta = 0.5
frame_tolerance = 1e-10

# [SYMPLECTIC]
symplectic_tolerance = 1e-10
symplectic_validation = 1e-8

# [METAPLECTIC]
margin_leak_tolerance = 1e-10
fio_max_padding = 16

# [WAVEFRONT]
sector_count = 72
sector_inner_radius = 2.0
sector_outer_radius = None  # None = margin-limited
sector_shells = 12
sector_fit_shells = 4  # outermost shells entering the decay regression
sector_slack = 1
rho_threshold = 3.0
alias_allowance = 3.5  # |V_g| of a ridge falls below the roundoff floor this far from it
growth_factor = 1.5
divergence_floor = 1e-6

# [PROPAGATORS]
caustic_distance = 0.1
split_steps = 256
split_reference_steps = 4096
dyson_order = 6
dyson_nodes = 8
dyson_flow_samples = 64
dyson_calibration = 1.0

# [EXAMPLES]
example1_t = 0.7853981633974483  # pi / 4
example2_mu = 3.0
example2_t = 0.5
example2_r = 0.4
example2_scale = 1.0
example2_norm_r = [0.0, 0.4]
example2_norm_p = [1.0, 2.0, float("inf")]

# [OUTPUT]
output_directory = "data"
experiment_name = None  # None = subcommand name
seed = 20240917
