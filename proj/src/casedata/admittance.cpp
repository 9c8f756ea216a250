#include <algorithm>
#include <cmath>

#include "bagopf/casedata.hpp"
#include "bagopf/error.hpp"

namespace bagopf {

AdmittanceModel build_admittance(const Network& network) {
  const std::size_t n = network.bus_count();
  AdmittanceModel model;
  model.neighborhoods.resize(n);
  model.branches.reserve(network.branches.size());

  using Triplet = Eigen::Triplet<Complex>;
  std::vector<Triplet> triplets;
  triplets.reserve(4 * network.branches.size() + n);

  for (const Branch& br : network.branches) {
    if (br.r == 0.0 && br.x == 0.0) {
      throw ValidationError("branch " + std::to_string(br.from) + "-" +
                            std::to_string(br.to) + " has zero series impedance");
    }
    const std::size_t f = network.index_of(br.from);
    const std::size_t t = network.index_of(br.to);
    const Complex ys = br.series_admittance();
    const Complex half_charging(0.0, br.b_charging / 2.0);
    const Complex tap = std::polar(br.tap_ratio, br.phase_shift);

    BranchAdmittance a;
    a.tt = ys + half_charging;
    a.ff = a.tt / (br.tap_ratio * br.tap_ratio);
    a.ft = -ys / std::conj(tap);
    a.tf = -ys / tap;
    model.branches.push_back(a);

    triplets.emplace_back(f, f, a.ff);
    triplets.emplace_back(f, t, a.ft);
    triplets.emplace_back(t, f, a.tf);
    triplets.emplace_back(t, t, a.tt);
    model.neighborhoods[f].push_back(t);
    model.neighborhoods[t].push_back(f);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const Bus& b = network.buses[k];
    // Always materialise the diagonal so the pattern covers every k = m.
    triplets.emplace_back(k, k, Complex(b.g_shunt, b.b_shunt));
    auto& nb = model.neighborhoods[k];
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }

  model.y.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  model.y.setFromTriplets(triplets.begin(), triplets.end());
  model.y.makeCompressed();
  return model;
}

}  // namespace bagopf
