#pragma once

#include <string>
#include <vector>

#include "hybstab/errors.hpp"

namespace hybstab {

/// Every named tolerance used across the library, with its default.
/// All values are overridable from the config document's "tolerances"
/// object and from the CLI via --tol NAME=VALUE.
struct Tolerances {
  // point and event classification
  double boundary_tol = 1e-9;
  double grad_tol = 1e-9;
  double field_tol = 1e-12;
  double lie_tol = 1e-9;
  double diffeo_tol = 1e-9;
  double jump_consistency_tol = 1e-7;
  double n_check = 32;  // samples per manifold for the load-time jump check

  // integration
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double event_tol = 1e-11;
  double h_init = 1e-3;
  double h_min = 1e-14;
  double h_max = 0.5;
  double max_steps = 1e6;

  // local analysis
  double max_order = 8;
  double coeff_tol = 1e-9;
  double section_offset = 1e-3;
  double newton_tol = 1e-12;

  // polycycle verification and verdicts
  double eigvec_offset = 1e-6;
  double connection_tol = 1e-4;
  double r_margin = 1e-6;
  double verify_t_max = 50.0;

  void set(const std::string& name, double value);
  std::vector<std::pair<std::string, double>> entries() const;
};

inline void Tolerances::set(const std::string& name, double value) {
  for (auto& [key, ref] : std::initializer_list<std::pair<const char*, double*>>{
           {"boundary_tol", &boundary_tol},
           {"grad_tol", &grad_tol},
           {"field_tol", &field_tol},
           {"lie_tol", &lie_tol},
           {"diffeo_tol", &diffeo_tol},
           {"jump_consistency_tol", &jump_consistency_tol},
           {"n_check", &n_check},
           {"rel_tol", &rel_tol},
           {"abs_tol", &abs_tol},
           {"event_tol", &event_tol},
           {"h_init", &h_init},
           {"h_min", &h_min},
           {"h_max", &h_max},
           {"max_steps", &max_steps},
           {"max_order", &max_order},
           {"coeff_tol", &coeff_tol},
           {"section_offset", &section_offset},
           {"newton_tol", &newton_tol},
           {"eigvec_offset", &eigvec_offset},
           {"connection_tol", &connection_tol},
           {"r_margin", &r_margin},
           {"verify_t_max", &verify_t_max},
       }) {
    if (name == key) {
      *ref = value;
      return;
    }
  }
  throw SchemaError("unknown tolerance name: " + name);
}

inline std::vector<std::pair<std::string, double>> Tolerances::entries() const {
  return {
      {"boundary_tol", boundary_tol},
      {"grad_tol", grad_tol},
      {"field_tol", field_tol},
      {"lie_tol", lie_tol},
      {"diffeo_tol", diffeo_tol},
      {"jump_consistency_tol", jump_consistency_tol},
      {"n_check", n_check},
      {"rel_tol", rel_tol},
      {"abs_tol", abs_tol},
      {"event_tol", event_tol},
      {"h_init", h_init},
      {"h_min", h_min},
      {"h_max", h_max},
      {"max_steps", max_steps},
      {"max_order", max_order},
      {"coeff_tol", coeff_tol},
      {"section_offset", section_offset},
      {"newton_tol", newton_tol},
      {"eigvec_offset", eigvec_offset},
      {"connection_tol", connection_tol},
      {"r_margin", r_margin},
      {"verify_t_max", verify_t_max},
  };
}

}  // namespace hybstab
