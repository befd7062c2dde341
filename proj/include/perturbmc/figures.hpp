#pragma once

#include <iosfwd>

#include "perturbmc/config.hpp"
#include "perturbmc/oracle.hpp"
#include "perturbmc/second_order.hpp"

namespace perturbmc {

/// The three scalar series feeding the mutual-information bound for the
/// departure observable: Sigma_{S,zeta}, Sigma_S, Sigma_zeta.
struct ChannelSeries {
  LagSeries sigma_s_zeta;
  LagSeries sigma_s;
  LagSeries sigma_zeta;
};

ChannelSeries approx_channel_series(const SecondOrderContext& ctx, const Vector& f, int n_max,
                                    int m_max);
ChannelSeries exact_channel_series(const JointChain& jc, const Vector& f_x, int n_max, int m_max);

/// Subcommand bodies; each returns the process exit code and writes data
/// files under cfg.out (figures) or check lines to `log`.
int run_validate(const RunConfig& cfg, std::ostream& log);
int run_figure(const RunConfig& cfg, const std::string& figure_id, std::ostream& log);
int run_verify(const RunConfig& cfg, const std::string& suite, std::ostream& log);

}  // namespace perturbmc
