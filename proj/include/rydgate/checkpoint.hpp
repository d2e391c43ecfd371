#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "rydgate/policy.hpp"
#include "rydgate/trpo.hpp"

namespace rydgate {

/// Training state persisted between runs. Episode rng streams are derived from
/// (seed, episode index), so the counter plus the seed fully capture the rng
/// position.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  TrpoConfig config;
  GaussianPolicy actor;
  Mlp critic;
  std::uint64_t episodes_done = 0;
  double best_fidelity = 0.0;
  double best_tau_min = 0.0;
};

namespace detail {

inline void put_u32(std::ostream& o, std::uint32_t v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_u64(std::ostream& o, std::uint64_t v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_f64(std::ostream& o, double v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_vec(std::ostream& o, const RVec& v) {
  put_u64(o, static_cast<std::uint64_t>(v.size()));
  o.write(reinterpret_cast<const char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
}
inline void put_sizes(std::ostream& o, const std::vector<int>& s) {
  put_u64(o, s.size());
  for (int x : s) put_u32(o, static_cast<std::uint32_t>(x));
}

inline std::uint32_t get_u32(std::istream& i) {
  std::uint32_t v = 0;
  i.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
inline std::uint64_t get_u64(std::istream& i) {
  std::uint64_t v = 0;
  i.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
inline double get_f64(std::istream& i) {
  double v = 0;
  i.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
inline RVec get_vec(std::istream& i) {
  const auto n = get_u64(i);
  RVec v(static_cast<Eigen::Index>(n));
  i.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  return v;
}
inline std::vector<int> get_sizes(std::istream& i) {
  const auto n = get_u64(i);
  std::vector<int> s(n);
  for (auto& x : s) x = static_cast<int>(get_u32(i));
  return s;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write("RGCKPT\0\0", 8);
  detail::put_u32(out, Checkpoint::kVersion);

  const TrpoConfig& c = ck.config;
  detail::put_f64(out, c.kl_bound);
  detail::put_f64(out, c.gamma_disc);
  detail::put_f64(out, c.gae_lambda);
  detail::put_u32(out, static_cast<std::uint32_t>(c.episodes_per_update));
  detail::put_u32(out, static_cast<std::uint32_t>(c.cg_iterations));
  detail::put_f64(out, c.cg_damping);
  detail::put_u32(out, static_cast<std::uint32_t>(c.line_search_steps));
  detail::put_f64(out, c.line_search_shrink);
  detail::put_u32(out, static_cast<std::uint32_t>(c.critic_epochs));
  detail::put_f64(out, c.critic_step_size);
  detail::put_f64(out, c.initial_sigma);
  detail::put_u64(out, c.seed);

  detail::put_sizes(out, ck.actor.net().sizes());
  detail::put_vec(out, ck.actor.flatten());
  detail::put_sizes(out, ck.critic.sizes());
  detail::put_vec(out, ck.critic.flatten());

  detail::put_u64(out, ck.episodes_done);
  detail::put_f64(out, ck.best_fidelity);
  detail::put_f64(out, ck.best_tau_min);
  if (!out) throw std::runtime_error("write failure on " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8] = {};
  in.read(magic, 8);
  if (std::string(magic, 6) != "RGCKPT")
    throw std::runtime_error(path + ": not a checkpoint file");
  const auto version = detail::get_u32(in);
  if (version != Checkpoint::kVersion)
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));

  Checkpoint ck;
  TrpoConfig& c = ck.config;
  c.kl_bound = detail::get_f64(in);
  c.gamma_disc = detail::get_f64(in);
  c.gae_lambda = detail::get_f64(in);
  c.episodes_per_update = static_cast<int>(detail::get_u32(in));
  c.cg_iterations = static_cast<int>(detail::get_u32(in));
  c.cg_damping = detail::get_f64(in);
  c.line_search_steps = static_cast<int>(detail::get_u32(in));
  c.line_search_shrink = detail::get_f64(in);
  c.critic_epochs = static_cast<int>(detail::get_u32(in));
  c.critic_step_size = detail::get_f64(in);
  c.initial_sigma = detail::get_f64(in);
  c.seed = detail::get_u64(in);

  const auto actor_sizes = detail::get_sizes(in);
  ck.actor = GaussianPolicy(Mlp(actor_sizes), 1.0);
  ck.actor.unflatten(detail::get_vec(in));
  ck.critic = Mlp(detail::get_sizes(in));
  ck.critic.unflatten(detail::get_vec(in));

  ck.episodes_done = detail::get_u64(in);
  ck.best_fidelity = detail::get_f64(in);
  ck.best_tau_min = detail::get_f64(in);
  if (!in) throw std::runtime_error(path + ": truncated checkpoint");
  return ck;
}

}  // namespace rydgate
