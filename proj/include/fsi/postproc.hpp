#pragma once

#include <string>

#include "fsi/coupled_solver.hpp"

namespace fsi {

struct TimeSeries {
  std::vector<std::string> names;
  std::vector<double> times;
  std::vector<std::vector<double>> columns;  // one vector per name

  explicit TimeSeries(std::vector<std::string> channel_names = {});
  void add_row(double t, const std::vector<double>& values);
  int channel(const std::string& name) const;
  const std::vector<double>& column(const std::string& name) const;
  std::size_t size() const { return times.size(); }
};

// Dofs whose basis functions touch the wetted structure boundary: interface
// nodes plus any fluid Dirichlet facet away from the outer bounding box (the
// rigid obstacle). Summing the instantaneous momentum residual over them is
// the variational traction evaluation.
std::vector<int> wetted_force_dofs(const FsiSystem& sys);
Vec2 interface_forces(const FsiSystem& sys, const VecX& inst_residual_f);

// Direct boundary integral of sigma(u, p) n over the same boundary on the
// reference configuration; first-order accurate, used as the cross-check.
Vec2 traction_direct(const FsiSystem& sys, const VecX& u, const VecX& p);

// P2 interpolation of the solid displacement at a reference point.
Vec2 probe_displacement(const Spaces& sp, const VecX& d, const Vec2& point);

struct Spectrum {
  std::vector<double> freq;
  std::vector<double> amplitude;  // single-sided
  double dominant_freq = 0.0;
  int dominant_bin = 0;
};

// Rectangular window, mean removed, uniform sampling required.
Spectrum amplitude_spectrum(const TimeSeries& series, const std::string& channel, double t0,
                            double t1);

struct ConvergenceFit {
  double rate = 0.0;
  double fit_residual = 0.0;
  bool monotone = true;
};

ConvergenceFit convergence_fit(const std::vector<double>& dts,
                               const std::vector<double>& errors);

double total_energy(const FsiSystem& sys, const HfState& state);

}  // namespace fsi
