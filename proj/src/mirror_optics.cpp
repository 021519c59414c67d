#include "phantom/mirror_optics.hpp"

#include "phantom/errors.hpp"

namespace phantom {

namespace {

void require_positive_k(double k) {
  if (!(k > 0.0)) throw ValidationError("wavenumber must be positive");
}

void require_model(const MirrorModel& model) {
  if (!(model.mu >= 0.0)) throw ValidationError("mirror parameter mu must be non-negative");
}

}  // namespace

cplx mirror_t(const MirrorModel& model, double k) {
  require_positive_k(k);
  require_model(model);
  return 2.0 / cplx(2.0, -model.mu * k);
}

cplx mirror_r(const MirrorModel& model, double k) { return 1.0 - mirror_t(model, k); }

CompositeScattering composite_tr(const MirrorModel& model, double k, double L) {
  require_positive_k(k);
  require_model(model);
  if (!(L > 0.0)) throw ValidationError("section length must be positive");
  const auto m = detail::sheet_pair<double>(model.mu, k, L);
  const auto [t, r] = detail::scattering_from_transfer(m);
  return {t, r, k, L};
}

}  // namespace phantom
