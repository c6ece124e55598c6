// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "mottsim/bounds.hpp"
#include "mottsim/domination.hpp"
#include "mottsim/io.hpp"
#include "mottsim/msd.hpp"
#include "mottsim/percolation.hpp"

namespace mott {

enum class ExperimentKind {
  mott_scan,
  perc_rc,
  palm_check,
  domination_check,
  bound_compare,
};

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_from_string(const std::string& name);

/// One run, parsed from the flat key = value config file.  Every run writes
/// CSV data plus one JSON summary into out_dir and is deterministic given
/// (config, seed) for any worker count.
struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::mott_scan;
  int dimension = 2;
  double box_side = 200.0;
  Boundary boundary = Boundary::periodic;
  std::string process = "poisson";  // poisson | crystal
  double rho = 1.0;
  double crystal_spacing = 1.0;
  double crystal_dilution = 0.5;
  double alpha = 0.0;
  std::vector<double> beta_grid;  // sorted ascending
  double r_cut = 40.0;
  double t_max = 1e12;     // horizon cap for walks
  double msd_target = 400.0;  // mean-square displacement aimed for at the horizon
  double window_fraction = 0.5;
  double gamma = 1.0;      // ell(beta) = gamma r_c(rho(beta))
  double rc1 = kReferenceRc2d;
  std::size_t replicas = 2000;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int workers = 0;  // 0 = hardware concurrency

  // perc-rc
  std::vector<double> rho_grid{0.5, 1.0, 2.0};
  std::vector<double> box_ladder{16.0, 32.0, 64.0, 128.0};
  double rc_tol = 0.02;
  std::vector<double> decay_multipliers{0.8, 1.0, 1.2};

  // palm-check
  double palm_window = 6.0;
  bool inject_wrong_palm = false;

  // domination-check
  double dom_p = 0.5;
  double dom_cell = 1.0;
  std::uint32_t dom_bound = 1;

  // bound-compare
  std::vector<std::size_t> cluster_caps{10, 100, 1000};
  std::size_t walk_replicas = 400;  // empirical-D budget per beta

  static ExperimentConfig from_kv(const KeyValueConfig& kv);
  static ExperimentConfig from_file(const std::string& path);
  KeyValueConfig to_kv() const;
  void validate() const;

  int effective_workers() const;
  BoxGeometry box() const;
  NuLaw nu() const { return NuLaw{alpha, 1.0}; }
};

/// geometric grid, n points from lo to hi inclusive
std::vector<double> geometric_grid(double lo, double hi, std::size_t n);

// --- reusable pipeline pieces -----------------------------------------------

struct HorizonCalibration {
  double horizon = 0.0;
  std::size_t pilots = 0;
  std::size_t reached = 0;
};

/// Pilot walks until |X|^2 reaches msd_target; the horizon is twice the
/// median hitting time (capped), so the production window ends deep in the
/// diffusive regime.  At large beta transport is carried by the rare
/// low-mark origins, so the pilots should come from a source conditioned on
/// a mobile origin (the production estimate stays unconditioned).
HorizonCalibration calibrate_horizon(const PalmSource& pilot_source,
                                     const RateModel& model, double msd_target,
                                     std::size_t pilots, double t_cap,
                                     std::uint64_t seed, std::uint64_t salt,
                                     int workers);

struct DiffusionRun {
  DiffusionEstimate estimate;
  MsdTable table;
  double horizon = 0.0;
  std::size_t truncated = 0;
  std::size_t stuck = 0;
};

/// One walk per environment replica; per-replica streams; fixed-order merge.
DiffusionRun estimate_diffusion(const PalmSource& source, const RateModel& model,
                                double horizon, std::size_t n,
                                double window_fraction, std::uint64_t seed,
                                std::uint64_t salt, int workers);

// --- experiment results -------------------------------------------------------

struct MottScanRow {
  double beta = 0.0;
  int axis = 0;  // 1-based in output
  double diffusion = 0.0;
  double stderr_diffusion = 0.0;
  double horizon = 0.0;
  std::size_t replicas = 0;
};

struct MottScanResult {
  std::vector<MottScanRow> rows;
  std::vector<std::pair<double, double>> beta_diffusion;  // mean over axes
  std::optional<ExponentFit> fit;
  int exit_code = 0;
};

MottScanResult run_mott_scan(const ExperimentConfig& cfg);

struct PercRcResult {
  std::vector<std::pair<double, RcEstimate>> rc_by_rho;
  // crossing-probability rows: rho, r, box, probability, stderr, n
  struct CrossingRow {
    double rho, r, box_side, probability, stderr_probability;
    std::size_t replicas;
  };
  std::vector<CrossingRow> crossing_rows;
  double scaling_max_rel_err = 0.0;  // vs rho^(-1/d), when rho = 1 is present
  int exit_code = 0;
};

PercRcResult run_perc_rc(const ExperimentConfig& cfg);

struct PalmBatteryRow {
  std::string statistic;
  double campbell = 0.0, campbell_err = 0.0;
  double direct = 0.0, direct_err = 0.0;
  double z = 0.0;
};

struct PalmCheckResult {
  std::vector<PalmBatteryRow> poisson_rows;
  std::vector<PalmBatteryRow> crystal_rows;
  double crystal_intensity_z = 0.0;
  bool pass = true;
  std::string first_failure;
  int exit_code = 0;
};

PalmCheckResult run_palm_check(const ExperimentConfig& cfg);

struct DominationCheckResult {
  std::size_t replicas = 0;
  std::size_t replicas_with_violation = 0;
  long min_slack = 0;
  double rho_prime = 0.0;
  KsResult marginal;  // Y1 cell counts vs directly thinned field
  bool pass = true;
  int exit_code = 0;
};

DominationCheckResult run_domination_check(const ExperimentConfig& cfg);

struct BoundCompareRow {
  double beta = 0.0;
  int axis = 0;
  double var_zero = 0.0, var_zero_err = 0.0;
  std::vector<double> var_cluster;      // one per cap
  std::vector<double> var_cluster_err;
  double var_best = 0.0, var_best_err = 0.0;
  double off_cluster = 0.0, off_cluster_err = 0.0;
  double closed_form = 0.0;
  double d_emp = 0.0, d_emp_err = 0.0;
  bool flagged = false;
};

struct BoundCompareResult {
  std::vector<BoundCompareRow> rows;
  double fit_c1 = 0.0, fit_c2 = 0.0, fit_C = 0.0;  // calibrated, never asserted
  int flagged_rows = 0;
  int exit_code = 0;
};

BoundCompareResult run_bound_compare(const ExperimentConfig& cfg);

/// Dispatch on cfg.experiment; returns the process exit code
/// (0 pass, 1 statistical rejection, 2 invariant violation, 3 config error).
int run_experiment(const ExperimentConfig& cfg);

}  // namespace mott
