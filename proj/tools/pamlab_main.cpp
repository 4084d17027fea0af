// Command-line front end.  Flags win over config-file keys; a key equals the
// long flag name with dashes turned into underscores.  Errors leave as one
// JSON line on stderr plus a nonzero exit code: 2 bad configuration, 3
// numerical failure, 4 I/O failure.

#include <cstdio>
#include <exception>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pamlab/config.hpp"
#include "pamlab/drivers.hpp"
#include "pamlab/errors.hpp"

namespace cli = pamlab::cli;
using pamlab::KeyValueConfig;

namespace {

void add_common(CLI::App* sub, cli::CommonOptions& c) {
  sub->add_option("--out", c.out_dir, "output root directory");
  sub->add_option("--experiment", c.experiment,
                  "run subdirectory (default: the subcommand name)");
  sub->add_option("--seed", c.seed, "master seed, 64-bit");
  sub->add_option("--workers", c.workers, "worker threads")
      ->check(CLI::Range(1, 256));
  sub->add_option("--config", c.config_file,
                  "key=value file merged underneath the flags");
}

std::optional<KeyValueConfig> open_config(const cli::CommonOptions& c) {
  if (c.config_file.empty()) return std::nullopt;
  return KeyValueConfig::parse_file(c.config_file);
}

// Flags already given on the command line stay untouched.
bool unset(CLI::App* sub, const char* flag) { return sub->count(flag) == 0; }

void merge_common(CLI::App* sub, KeyValueConfig& kv, cli::CommonOptions& c) {
  if (auto v = kv.take_string("out")) {
    if (unset(sub, "--out")) c.out_dir = *v;
  }
  if (auto v = kv.take_string("experiment")) {
    if (unset(sub, "--experiment")) c.experiment = *v;
  }
  if (auto v = kv.take_int("workers")) {
    if (unset(sub, "--workers")) c.workers = static_cast<int>(*v);
  }
  if (auto v = kv.take_u64("seed")) {
    if (unset(sub, "--seed")) {
      c.seed = *v;
      c.seed_set = true;
    }
  }
}

void finalize_common(CLI::App* sub, cli::CommonOptions& c) {
  c.seed_set = c.seed_set || sub->count("--seed") > 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "moment laboratory for a parabolic evolution in a rough Gaussian "
      "potential: growth-rate solvers, covariance kernels, path-functional "
      "Monte Carlo, a variational maximizer, and consistency sweeps"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pamlab 0.1.0");
  int rc = 0;

  // rates
  auto ro = std::make_shared<cli::RatesOptions>();
  {
    CLI::App* sub = app.add_subcommand(
        "rates", "solve the replica growth-rate equations over a list of N");
    add_common(sub, ro->common);
    sub->add_option("--N", ro->Ns, "replica counts")->delimiter(',');
    sub->add_flag("--decades", ro->decades, "use N = 1e2 .. 1e8");
    sub->add_option("--C", ro->C, "covariance scale in the clock equation");
    sub->add_option("--t", ro->t, "time horizon in the clock equation");
    sub->callback([sub, ro, &rc] {
      finalize_common(sub, ro->common);
      if (auto kv = open_config(ro->common)) {
        merge_common(sub, *kv, ro->common);
        if (auto v = kv->take_double_list("N")) {
          if (unset(sub, "--N")) ro->Ns = *v;
        }
        if (auto v = kv->take_bool("decades")) {
          if (unset(sub, "--decades")) ro->decades = *v;
        }
        if (auto v = kv->take_double("C")) {
          if (unset(sub, "--C")) ro->C = *v;
        }
        if (auto v = kv->take_double("t")) {
          if (unset(sub, "--t")) ro->t = *v;
        }
        kv->require_all_consumed();
      }
      rc = cli::cmd_rates(*ro);
    });
  }

  // kernel-eval
  auto ko = std::make_shared<cli::KernelEvalOptions>();
  {
    CLI::App* sub = app.add_subcommand(
        "kernel-eval", "tabulate a covariance kernel along a radius grid");
    add_common(sub, ko->common);
    sub->add_option("--kernel", ko->kernel, "kernel spec string");
    sub->add_option("--r-min", ko->r_min, "first radius");
    sub->add_option("--r-max", ko->r_max, "last radius");
    sub->add_option("--n", ko->n_r, "number of radii");
    sub->callback([sub, ko, &rc] {
      finalize_common(sub, ko->common);
      if (auto kv = open_config(ko->common)) {
        merge_common(sub, *kv, ko->common);
        if (auto v = kv->take_string("kernel")) {
          if (unset(sub, "--kernel")) ko->kernel = *v;
        }
        if (auto v = kv->take_double("r_min")) {
          if (unset(sub, "--r-min")) ko->r_min = *v;
        }
        if (auto v = kv->take_double("r_max")) {
          if (unset(sub, "--r-max")) ko->r_max = *v;
        }
        if (auto v = kv->take_u64("n")) {
          if (unset(sub, "--n")) ko->n_r = *v;
        }
        kv->require_all_consumed();
      }
      rc = cli::cmd_kernel_eval(*ko);
    });
  }

  // dalang
  auto dopt = std::make_shared<cli::DalangOptions>();
  {
    CLI::App* sub = app.add_subcommand(
        "dalang", "decide whether the spectral integrability condition holds");
    add_common(sub, dopt->common);
    sub->add_option("--kernel", dopt->kernel, "kernel spec string");
    sub->callback([sub, dopt, &rc] {
      finalize_common(sub, dopt->common);
      if (auto kv = open_config(dopt->common)) {
        merge_common(sub, *kv, dopt->common);
        if (auto v = kv->take_string("kernel")) {
          if (unset(sub, "--kernel")) dopt->kernel = *v;
        }
        kv->require_all_consumed();
      }
      rc = cli::cmd_dalang(*dopt);
    });
  }

  // variational
  auto vo = std::make_shared<cli::VariationalOptions>();
  {
    CLI::App* sub = app.add_subcommand(
        "variational",
        "maximize the quartic-minus-Dirichlet energy on a periodic grid");
    add_common(sub, vo->common);
    sub->add_option("--kernel", vo->kernel, "kernel spec string");
    sub->add_option("--n", vo->n, "grid points per axis, a power of two");
    sub->add_option("--length", vo->length, "period of the box");
    sub->add_option("--restarts", vo->restarts, "ascent restarts");
    sub->add_option("--tol", vo->tol, "relative stall tolerance");
    sub->add_option("--eps", vo->eps_list,
                    "smoothing widths: run the envelope sweep instead")
        ->delimiter(',');
    sub->callback([sub, vo, &rc] {
      finalize_common(sub, vo->common);
      if (auto kv = open_config(vo->common)) {
        merge_common(sub, *kv, vo->common);
        if (auto v = kv->take_string("kernel")) {
          if (unset(sub, "--kernel")) vo->kernel = *v;
        }
        if (auto v = kv->take_u64("n")) {
          if (unset(sub, "--n")) vo->n = *v;
        }
        if (auto v = kv->take_double("length")) {
          if (unset(sub, "--length")) vo->length = *v;
        }
        if (auto v = kv->take_u64("restarts")) {
          if (unset(sub, "--restarts")) vo->restarts = *v;
        }
        if (auto v = kv->take_double("tol")) {
          if (unset(sub, "--tol")) vo->tol = *v;
        }
        if (auto v = kv->take_double_list("eps")) {
          if (unset(sub, "--eps")) vo->eps_list = *v;
        }
        kv->require_all_consumed();
      }
      rc = cli::cmd_variational(*vo);
    });
  }

  // moment-mc
  auto mo = std::make_shared<cli::MomentOptions>();
  {
    CLI::App* sub = app.add_subcommand(
        "moment-mc",
        "Monte Carlo replica moment of the exponential path functional");
    add_common(sub, mo->common);
    sub->add_option("--kernel", mo->kernel, "kernel spec string");
    sub->add_option("--N", mo->n_replicas, "replica count");
    sub->add_option("--dim", mo->dim, "spatial dimension");
    sub->add_option("--t", mo->t, "time horizon");
    sub->add_option("--steps", mo->steps, "time steps (0: from the rate)");
    sub->add_option("--steps-per-unit", mo->steps_per_unit,
                    "steps per unit time when --steps is 0");
    sub->add_option("--samples", mo->n_samples, "Monte Carlo samples");
    sub->add_option("--mollify-eps", mo->mollify_eps,
                    "smooth a singular kernel at this width");
    sub->add_flag("--mollify-auto", mo->mollify_auto,
                  "smooth at a width tied to the step size");
    sub->callback([sub, mo, &rc] {
      finalize_common(sub, mo->common);
      if (auto kv = open_config(mo->common)) {
        merge_common(sub, *kv, mo->common);
        if (auto v = kv->take_string("kernel")) {
          if (unset(sub, "--kernel")) mo->kernel = *v;
        }
        if (auto v = kv->take_u64("N")) {
          if (unset(sub, "--N")) mo->n_replicas = *v;
        }
        if (auto v = kv->take_int("dim")) {
          if (unset(sub, "--dim")) mo->dim = static_cast<int>(*v);
        }
        if (auto v = kv->take_double("t")) {
          if (unset(sub, "--t")) mo->t = *v;
        }
        if (auto v = kv->take_u64("steps")) {
          if (unset(sub, "--steps")) mo->steps = *v;
        }
        if (auto v = kv->take_u64("steps_per_unit")) {
          if (unset(sub, "--steps-per-unit")) mo->steps_per_unit = *v;
        }
        if (auto v = kv->take_u64("samples")) {
          if (unset(sub, "--samples")) mo->n_samples = *v;
        }
        if (auto v = kv->take_double("mollify_eps")) {
          if (unset(sub, "--mollify-eps")) mo->mollify_eps = *v;
        }
        if (auto v = kv->take_bool("mollify_auto")) {
          if (unset(sub, "--mollify-auto")) mo->mollify_auto = *v;
        }
        kv->require_all_consumed();
      }
      rc = cli::cmd_moment_mc(*mo);
    });
  }

  // submult-test
  auto so = std::make_shared<cli::SubmultOptions>();
  {
    CLI::App* sub = app.add_subcommand(
        "submult-test",
        "check the joint moment against the product of time-split moments");
    add_common(sub, so->common);
    sub->add_option("--kernel", so->kernel, "kernel spec string");
    sub->add_option("--m", so->m, "paths per sample");
    sub->add_option("--t1", so->t1, "first split length");
    sub->add_option("--t2", so->t2, "second split length");
    sub->add_option("--samples", so->n_samples, "Monte Carlo samples");
    sub->add_option("--steps-per-unit", so->steps_per_unit,
                    "time steps per unit time");
    sub->add_flag("--iterated", so->iterated,
                  "equal blocks raised to a power instead of one split");
    sub->add_option("--blocks", so->n_blocks, "block count when iterated");
    sub->add_option("--t-block", so->t_block, "block length when iterated");
    sub->add_option("--mollify-eps", so->mollify_eps,
                    "smooth a singular kernel at this width");
    sub->add_flag("--mollify-auto", so->mollify_auto,
                  "smooth at a width tied to the step size");
    sub->callback([sub, so, &rc] {
      finalize_common(sub, so->common);
      if (auto kv = open_config(so->common)) {
        merge_common(sub, *kv, so->common);
        if (auto v = kv->take_string("kernel")) {
          if (unset(sub, "--kernel")) so->kernel = *v;
        }
        if (auto v = kv->take_u64("m")) {
          if (unset(sub, "--m")) so->m = *v;
        }
        if (auto v = kv->take_double("t1")) {
          if (unset(sub, "--t1")) so->t1 = *v;
        }
        if (auto v = kv->take_double("t2")) {
          if (unset(sub, "--t2")) so->t2 = *v;
        }
        if (auto v = kv->take_u64("samples")) {
          if (unset(sub, "--samples")) so->n_samples = *v;
        }
        if (auto v = kv->take_u64("steps_per_unit")) {
          if (unset(sub, "--steps-per-unit")) so->steps_per_unit = *v;
        }
        if (auto v = kv->take_bool("iterated")) {
          if (unset(sub, "--iterated")) so->iterated = *v;
        }
        if (auto v = kv->take_u64("blocks")) {
          if (unset(sub, "--blocks")) so->n_blocks = *v;
        }
        if (auto v = kv->take_double("t_block")) {
          if (unset(sub, "--t-block")) so->t_block = *v;
        }
        if (auto v = kv->take_double("mollify_eps")) {
          if (unset(sub, "--mollify-eps")) so->mollify_eps = *v;
        }
        if (auto v = kv->take_bool("mollify_auto")) {
          if (unset(sub, "--mollify-auto")) so->mollify_auto = *v;
        }
        kv->require_all_consumed();
      }
      rc = cli::cmd_submult(*so);
    });
  }

  // theorem-table
  auto to = std::make_shared<cli::TheoremOptions>();
  {
    CLI::App* sub = app.add_subcommand(
        "theorem-table",
        "normalized log-moments against the predicted growth rate over N");
    add_common(sub, to->common);
    sub->add_option("--kernel", to->kernel, "kernel spec string");
    sub->add_option("--N", to->Ns, "replica counts")->delimiter(',');
    sub->add_option("--dim", to->dim, "spatial dimension");
    sub->add_option("--t", to->t, "time horizon");
    sub->add_option("--steps", to->steps, "time steps");
    sub->add_option("--samples", to->n_samples, "Monte Carlo samples per N");
    sub->add_option("--mollify-eps", to->mollify_eps,
                    "smooth a singular kernel at this width");
    sub->add_flag("!--no-mollify-auto", to->mollify_auto,
                  "disable the default step-size smoothing");
    sub->callback([sub, to, &rc] {
      finalize_common(sub, to->common);
      if (auto kv = open_config(to->common)) {
        merge_common(sub, *kv, to->common);
        if (auto v = kv->take_string("kernel")) {
          if (unset(sub, "--kernel")) to->kernel = *v;
        }
        if (auto v = kv->take_size_list("N")) {
          if (unset(sub, "--N")) to->Ns = *v;
        }
        if (auto v = kv->take_int("dim")) {
          if (unset(sub, "--dim")) to->dim = static_cast<int>(*v);
        }
        if (auto v = kv->take_double("t")) {
          if (unset(sub, "--t")) to->t = *v;
        }
        if (auto v = kv->take_u64("steps")) {
          if (unset(sub, "--steps")) to->steps = *v;
        }
        if (auto v = kv->take_u64("samples")) {
          if (unset(sub, "--samples")) to->n_samples = *v;
        }
        if (auto v = kv->take_double("mollify_eps")) {
          if (unset(sub, "--mollify-eps")) to->mollify_eps = *v;
        }
        if (auto v = kv->take_bool("mollify_auto")) {
          if (unset(sub, "--no-mollify-auto")) to->mollify_auto = *v;
        }
        kv->require_all_consumed();
      }
      rc = cli::cmd_theorem_table(*to);
    });
  }

  // bochner-test
  auto bo = std::make_shared<cli::BochnerOptions>();
  {
    CLI::App* sub = app.add_subcommand(
        "bochner-test",
        "pairwise versus spectral evaluation of the double time integral on "
        "random cosine-atom kernels");
    add_common(sub, bo->common);
    sub->add_option("--count", bo->count, "random kernels to draw");
    sub->add_option("--steps", bo->steps, "time steps");
    sub->callback([sub, bo, &rc] {
      finalize_common(sub, bo->common);
      if (auto kv = open_config(bo->common)) {
        merge_common(sub, *kv, bo->common);
        if (auto v = kv->take_u64("count")) {
          if (unset(sub, "--count")) bo->count = *v;
        }
        if (auto v = kv->take_u64("steps")) {
          if (unset(sub, "--steps")) bo->steps = *v;
        }
        kv->require_all_consumed();
      }
      rc = cli::cmd_bochner(*bo);
    });
  }

  // pam-crosscheck
  auto co = std::make_shared<cli::CrosscheckOptions>();
  {
    CLI::App* sub = app.add_subcommand(
        "pam-crosscheck",
        "field-sampled solution moments against the replica functional");
    add_common(sub, co->common);
    sub->add_option("--N", co->n_replicas, "moment order, at most 3");
    sub->add_option("--dim", co->dim, "spatial dimension");
    sub->add_option("--t", co->t, "time horizon, at most 0.5");
    sub->add_option("--eps", co->eps, "field smoothing width");
    sub->add_option("--T", co->T, "covariance range parameter");
    sub->add_option("--steps", co->steps, "time steps (0: from the rate)");
    sub->add_option("--steps-per-unit", co->steps_per_unit,
                    "steps per unit time when --steps is 0");
    sub->add_option("--fields", co->m_fields, "field draws");
    sub->add_option("--paths", co->m_paths, "paths per field");
    sub->add_option("--replica-samples", co->m_replica_samples,
                    "samples on the replica side");
    sub->callback([sub, co, &rc] {
      finalize_common(sub, co->common);
      if (auto kv = open_config(co->common)) {
        merge_common(sub, *kv, co->common);
        if (auto v = kv->take_int("N")) {
          if (unset(sub, "--N")) co->n_replicas = static_cast<int>(*v);
        }
        if (auto v = kv->take_int("dim")) {
          if (unset(sub, "--dim")) co->dim = static_cast<int>(*v);
        }
        if (auto v = kv->take_double("t")) {
          if (unset(sub, "--t")) co->t = *v;
        }
        if (auto v = kv->take_double("eps")) {
          if (unset(sub, "--eps")) co->eps = *v;
        }
        if (auto v = kv->take_double("T")) {
          if (unset(sub, "--T")) co->T = *v;
        }
        if (auto v = kv->take_u64("steps")) {
          if (unset(sub, "--steps")) co->steps = *v;
        }
        if (auto v = kv->take_u64("steps_per_unit")) {
          if (unset(sub, "--steps-per-unit")) co->steps_per_unit = *v;
        }
        if (auto v = kv->take_u64("fields")) {
          if (unset(sub, "--fields")) co->m_fields = *v;
        }
        if (auto v = kv->take_u64("paths")) {
          if (unset(sub, "--paths")) co->m_paths = *v;
        }
        if (auto v = kv->take_u64("replica_samples")) {
          if (unset(sub, "--replica-samples")) {
            co->m_replica_samples = *v;
          }
        }
        kv->require_all_consumed();
      }
      rc = cli::cmd_crosscheck(*co);
    });
  }

  // accept
  auto ao = std::make_shared<cli::AcceptOptions>();
  {
    CLI::App* sub = app.add_subcommand(
        "accept", "run the full acceptance sweep and report each criterion");
    add_common(sub, ao->common);
    sub->callback([sub, ao, &rc] {
      finalize_common(sub, ao->common);
      if (auto kv = open_config(ao->common)) {
        merge_common(sub, *kv, ao->common);
        kv->require_all_consumed();
      }
      rc = cli::cmd_accept(*ao);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", cli::error_json(e).c_str());
    return cli::exit_code_for(e);
  }
  return rc;
}
