#include "ustab/bundle_io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace ustab {

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("bundle cache truncated");
  return value;
}

template <typename Bundle>
auto fields(Bundle& b) {
  using Ptr = decltype(&b.B);
  return std::vector<std::pair<std::string, Ptr>>{
      {"B", &b.B}, {"W", &b.W}, {"V", &b.V}, {"S", &b.S}, {"Z", &b.Z}, {"dS", &b.dS}};
}

}  // namespace

void write_bundle(std::ostream& out, const PathBundle& bundle) {
  out.write("USTB", 4);
  put<std::uint32_t>(out, kBundleFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.steps()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(bundle.paths()));
  put<std::uint64_t>(out, bundle.seed);
  put<double>(out, bundle.grid.horizon());
  put<double>(out, bundle.rho);
  put<std::uint8_t>(out, bundle.params ? 1 : 0);
  if (bundle.params) {
    const auto& p = *bundle.params;
    for (double v : {p.mu(), p.kappa(), p.theta(), p.sigma(), p.v0(), p.rho(), p.horizon()}) {
      put<double>(out, v);
    }
  }
  const auto fs = fields(bundle);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(fs.size()));
  for (const auto& [name, m] : fs) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m->cols()));
  }
  for (const auto& [name, m] : fs) {
    out.write(reinterpret_cast<const char*>(m->data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m->size())));
  }
  if (!out) throw std::runtime_error("bundle cache write failed");
}

PathBundle read_bundle(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || std::memcmp(magic.data(), "USTB", 4) != 0) throw std::runtime_error("not a bundle cache");
  if (get<std::uint32_t>(in) != kBundleFormatVersion) {
    throw std::runtime_error("unsupported bundle cache version");
  }
  const auto steps = static_cast<int>(get<std::uint32_t>(in));
  const auto paths = static_cast<Index>(get<std::uint64_t>(in));
  const auto seed = get<std::uint64_t>(in);
  const double horizon = get<double>(in);
  const double rho = get<double>(in);
  std::optional<HestonParams> params;
  if (get<std::uint8_t>(in) != 0) {
    std::array<double, 7> v{};
    for (double& x : v) x = get<double>(in);
    params.emplace(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
  }
  PathBundle bundle{TimeGrid(steps, horizon), params, rho, seed, {}, {}, {}, {}, {}, {}};
  auto fs = fields(bundle);
  const auto count = get<std::uint32_t>(in);
  if (count != fs.size()) throw std::runtime_error("bundle cache field list mismatch");
  for (auto& [name, m] : fs) {
    const auto len = get<std::uint8_t>(in);
    std::string stored(len, '\0');
    in.read(stored.data(), len);
    if (stored != name) throw std::runtime_error("bundle cache field list mismatch");
    m->resize(paths, static_cast<Index>(get<std::uint32_t>(in)));
  }
  for (auto& [name, m] : fs) {
    in.read(reinterpret_cast<char*>(m->data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m->size())));
    if (!in) throw std::runtime_error("bundle cache truncated");
  }
  return bundle;
}

void write_bundle_file(const std::string& path, const PathBundle& bundle) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  write_bundle(out, bundle);
}

PathBundle read_bundle_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_bundle(in);
}

void export_terminals_csv(std::ostream& out, const PathBundle& bundle) {
  const int n = bundle.steps();
  out << "path,B_T,W_T,V_T,S_T,Z_T\n" << std::setprecision(17);
  for (Index r = 0; r < bundle.paths(); ++r) {
    out << r << ',' << bundle.B(r, n) << ',' << bundle.W(r, n) << ',' << bundle.V(r, n) << ','
        << bundle.S(r, n) << ',' << bundle.Z(r, n) << '\n';
  }
}

}  // namespace ustab
