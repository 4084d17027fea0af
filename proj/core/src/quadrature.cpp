#include "pamlab/quadrature.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <memory>
#include <string>

#include "pamlab/errors.hpp"

namespace pamlab::quad {
namespace {

// GSL's default error handler aborts; numerical failures must throw instead.
const int kHandlerOff = [] {
  gsl_set_error_handler_off();
  return 0;
}();

struct Counted {
  const Fn* f;
  std::size_t evals = 0;
};

double trampoline(double x, void* p) {
  auto* c = static_cast<Counted*>(p);
  ++c->evals;
  return (*c->f)(x);
}

struct WorkspaceDeleter {
  void operator()(gsl_integration_workspace* w) const {
    gsl_integration_workspace_free(w);
  }
};

Result finish(int status, double value, double abserr, const Counted& c,
              const Options& opt, const char* what) {
  Result r{value, abserr, c.evals};
  if (c.evals > opt.max_evals) {
    throw QuadratureError(std::string(what) + ": evaluation budget exceeded (" +
                          std::to_string(c.evals) + " > " +
                          std::to_string(opt.max_evals) + ")");
  }
  if (status != GSL_SUCCESS) {
    // Roundoff-limited results are acceptable when the reported error is
    // already inside the requested tolerance band.
    const double tol =
        std::max(opt.epsabs, std::abs(value) * std::max(opt.epsrel, 1e-14));
    if (abserr <= 10.0 * tol) return r;
    throw QuadratureError(std::string(what) + ": " + gsl_strerror(status) +
                          " (abserr=" + std::to_string(abserr) + ")");
  }
  return r;
}

}  // namespace

Result integrate(const Fn& f, double a, double b, const Options& opt) {
  Counted c{&f};
  gsl_function gf{&trampoline, &c};
  std::unique_ptr<gsl_integration_workspace, WorkspaceDeleter> ws(
      gsl_integration_workspace_alloc(opt.limit));
  double value = 0.0, abserr = 0.0;
  const int status = gsl_integration_qags(&gf, a, b, opt.epsabs, opt.epsrel,
                                          opt.limit, ws.get(), &value, &abserr);
  return finish(status, value, abserr, c, opt, "integrate");
}

Result integrate_to_inf(const Fn& f, double a, const Options& opt) {
  Counted c{&f};
  gsl_function gf{&trampoline, &c};
  std::unique_ptr<gsl_integration_workspace, WorkspaceDeleter> ws(
      gsl_integration_workspace_alloc(opt.limit));
  double value = 0.0, abserr = 0.0;
  const int status = gsl_integration_qagiu(&gf, a, opt.epsabs, opt.epsrel,
                                           opt.limit, ws.get(), &value, &abserr);
  return finish(status, value, abserr, c, opt, "integrate_to_inf");
}

MaxResult golden_max(const Fn& f, double a, double b, double xtol) {
  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > xtol * (1.0 + std::abs(a) + std::abs(b))) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    }
  }
  const double xm = 0.5 * (a + b);
  return MaxResult{xm, f(xm)};
}

}  // namespace pamlab::quad
