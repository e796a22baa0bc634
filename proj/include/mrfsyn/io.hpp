#pragma once

#include "acquisition.hpp"
#include "config.hpp"
#include "synthesis.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unistd.h>

namespace mrf {

/// Missing, unreadable or corrupt artifact. Counts as a user error at the CLI.
class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Container layout, all integers little-endian:
//   8 bytes   magic "MRFSYN01"
//   8 bytes   uint64 header length H
//   H bytes   UTF-8 JSON header {dtype, shape, endianness, role, units, payload_bytes, digest, manifest}
//   payload   row-major array; f32, or c64 stored as interleaved (re, im) f32 pairs
inline constexpr char kMagic[8] = {'M', 'R', 'F', 'S', 'Y', 'N', '0', '1'};

enum class DType
{
  F32,
  C64,
};

inline char const *dtype_name(DType d) { return d == DType::F32 ? "f32" : "c64"; }
inline std::size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 8; }

struct ArrayContainer
{
  DType dtype = DType::F32;
  std::vector<Index> shape;
  std::string role;
  std::string units;
  nlohmann::json manifest = nlohmann::json::object();
  std::vector<float> values; // f32 elements; c64 arrays hold 2 floats per element

  std::size_t elements() const
  {
    std::size_t n = 1;
    for (Index s : shape) { n *= static_cast<std::size_t>(s); }
    return n;
  }

  std::string digest() const
  {
    return std::string("fnv1a64:") + Fnv1a().add_values(std::span<float const>(values)).hex();
  }

  nlohmann::json header() const
  {
    return {{"dtype", dtype_name(dtype)}, {"shape", shape},       {"endianness", "little"},
            {"role", role},               {"units", units},       {"payload_bytes", values.size() * sizeof(float)},
            {"digest", digest()},         {"manifest", manifest}};
  }
};

namespace detail {

inline void put_u64(std::string &out, std::uint64_t v)
{
  for (int i = 0; i < 8; ++i) { out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF)); }
}

inline std::uint64_t get_u64(unsigned char const *p)
{
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) { v = (v << 8) | p[i]; }
  return v;
}

inline std::uint32_t to_le(std::uint32_t v)
{
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

} // namespace detail

inline std::string encode(ArrayContainer const &c)
{
  require(c.values.size() == c.elements() * (c.dtype == DType::C64 ? 2 : 1), "container: payload does not match shape");
  std::string const header = c.header().dump();
  std::string out(kMagic, sizeof(kMagic));
  detail::put_u64(out, header.size());
  out += header;
  std::size_t const base = out.size();
  out.resize(base + c.values.size() * sizeof(float));
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    auto const bits = detail::to_le(std::bit_cast<std::uint32_t>(c.values[i]));
    std::memcpy(out.data() + base + 4 * i, &bits, 4);
  }
  return out;
}

inline ArrayContainer decode(std::string const &bytes, std::string const &what = "container")
{
  auto fail = [&](std::string const &why) { return IoError(what + ": " + why); };
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) { throw fail("not an mrfsyn container"); }
  auto const *raw = reinterpret_cast<unsigned char const *>(bytes.data());
  std::uint64_t const hlen = detail::get_u64(raw + 8);
  if (hlen > bytes.size() - 16) { throw fail("truncated header"); }
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
  } catch (nlohmann::json::exception const &) {
    throw fail("header is not valid JSON");
  }

  ArrayContainer c;
  try {
    auto const dt = h.at("dtype").get<std::string>();
    if (dt != "f32" && dt != "c64") { throw fail("unsupported dtype " + dt); }
    if (h.at("endianness").get<std::string>() != "little") { throw fail("unsupported endianness"); }
    c.dtype = dt == "f32" ? DType::F32 : DType::C64;
    c.shape = h.at("shape").get<std::vector<Index>>();
    c.role = h.at("role").get<std::string>();
    c.units = h.at("units").get<std::string>();
    c.manifest = h.at("manifest");
  } catch (nlohmann::json::exception const &e) {
    throw fail(std::string("malformed header (") + e.what() + ")");
  }
  for (Index s : c.shape) {
    if (s < 0) { throw fail("negative dimension"); }
  }
  std::size_t const payload = bytes.size() - 16 - hlen;
  if (payload != c.elements() * dtype_size(c.dtype)) { throw fail("payload size does not match shape"); }
  c.values.resize(payload / 4);
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + 16 + hlen + 4 * i, 4);
    c.values[i] = std::bit_cast<float>(detail::to_le(bits));
  }
  if (h.value("digest", std::string()) != c.digest()) { throw fail("digest mismatch (corrupt payload)"); }
  return c;
}

/// Writes to a sibling temp file and renames it into place, so readers never see a partial file.
inline void write_file_atomic(std::filesystem::path const &path, std::string const &bytes)
{
  if (path.has_parent_path()) { std::filesystem::create_directories(path.parent_path()); }
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) { throw IoError("cannot open " + tmp.string() + " for writing"); }
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) {
      std::filesystem::remove(tmp);
      throw IoError("short write to " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(std::filesystem::path const &path)
{
  std::ifstream f(path, std::ios::binary);
  if (!f) { throw IoError("cannot open " + path.string()); }
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_container(std::filesystem::path const &path, ArrayContainer const &c) { write_file_atomic(path, encode(c)); }
inline ArrayContainer read_container(std::filesystem::path const &path) { return decode(read_file(path), path.string()); }

// Typed conversions. Every artifact stores f32 samples: doubles are rounded once on the way out, and
// bit-exact thereafter. Role strings identify the artifact kind on load.

namespace detail {

inline void expect_role(ArrayContainer const &c, std::string const &role)
{
  if (c.role != role) { throw IoError("expected a '" + role + "' artifact, found '" + c.role + "'"); }
}

inline void push_real(std::vector<float> &out, RealImage const &img)
{
  for (double v : img.data) { out.push_back(static_cast<float>(v)); }
}

inline RealImage plane(ArrayContainer const &c, Index k)
{
  Index const h = c.shape[c.shape.size() - 2], w = c.shape.back();
  RealImage img(h, w);
  for (Index i = 0; i < h * w; ++i) { img.data[static_cast<std::size_t>(i)] = c.values[static_cast<std::size_t>(k * h * w + i)]; }
  return img;
}

inline void push_complex(std::vector<float> &out, std::span<Cx const> v)
{
  for (Cx z : v) {
    out.push_back(static_cast<float>(z.real()));
    out.push_back(static_cast<float>(z.imag()));
  }
}

inline std::vector<Cx> complex_values(ArrayContainer const &c)
{
  std::vector<Cx> v(c.values.size() / 2);
  for (std::size_t i = 0; i < v.size(); ++i) { v[i] = {c.values[2 * i], c.values[2 * i + 1]}; }
  return v;
}

} // namespace detail

// Phantom: [5, h, w] planes t1, t2, pd, b0, labels.
inline ArrayContainer to_container(PhantomSlice const &ph, nlohmann::json manifest)
{
  ArrayContainer c{DType::F32, {5, ph.h, ph.w}, "phantom", "planes: t1 ms, t2 ms, pd, b0 Hz, label", std::move(manifest), {}};
  for (auto const *img : {&ph.t1, &ph.t2, &ph.pd, &ph.b0}) { detail::push_real(c.values, *img); }
  for (int l : ph.labels.data) { c.values.push_back(static_cast<float>(l)); }
  return c;
}

inline PhantomSlice phantom_from(ArrayContainer const &c)
{
  detail::expect_role(c, "phantom");
  require(c.shape.size() == 3 && c.shape[0] == 5, "phantom artifact: bad shape");
  PhantomSlice ph;
  ph.h = c.shape[1];
  ph.w = c.shape[2];
  ph.t1 = detail::plane(c, 0);
  ph.t2 = detail::plane(c, 1);
  ph.pd = detail::plane(c, 2);
  ph.b0 = detail::plane(c, 3);
  auto const lab = detail::plane(c, 4);
  ph.labels = LabelImage(ph.h, ph.w);
  for (std::size_t i = 0; i < lab.data.size(); ++i) { ph.labels.data[i] = static_cast<int>(lab.data[i]); }
  return ph;
}

// Dictionary: c64 [n_atoms, length]. The exact pre-normalization norms travel in the manifest.
inline ArrayContainer to_container(Dictionary const &d, nlohmann::json manifest)
{
  manifest["atom_norms"] = d.atom_norms;
  manifest["grid"] = d.grid;
  manifest["fisp"] = d.spec;
  manifest["dictionary_hash"] = d.manifest_hash;
  ArrayContainer c{DType::C64, {d.n_atoms, d.length}, "dictionary", "unit-norm fingerprints", std::move(manifest), {}};
  detail::push_complex(c.values, d.atoms);
  return c;
}

/// Rows are renormalized in double after the f32 round trip, so loaded atoms are unit norm to 1e-15.
inline Dictionary dictionary_from(ArrayContainer const &c)
{
  detail::expect_role(c, "dictionary");
  require(c.shape.size() == 2, "dictionary artifact: bad shape");
  Dictionary d;
  try {
    d.grid = c.manifest.at("grid").get<ParamGrid>();
    d.spec = c.manifest.at("fisp").get<FispMrf>();
    d.atom_norms = c.manifest.at("atom_norms").get<std::vector<double>>();
    d.manifest_hash = c.manifest.at("dictionary_hash").get<std::string>();
  } catch (nlohmann::json::exception const &e) {
    throw IoError(std::string("dictionary manifest incomplete: ") + e.what());
  }
  d.n_atoms = c.shape[0];
  d.length = c.shape[1];
  for (auto const &[i, j] : d.grid.pairs()) {
    d.params.emplace_back(d.grid.t1_values_ms[static_cast<std::size_t>(i)], d.grid.t2_values_ms[static_cast<std::size_t>(j)], 1.0);
  }
  require(static_cast<Index>(d.params.size()) == d.n_atoms && static_cast<Index>(d.atom_norms.size()) == d.n_atoms,
          "dictionary artifact: grid does not match atom count");
  require(d.length == d.spec.n_tr, "dictionary artifact: length does not match the sequence");
  d.atoms = detail::complex_values(c);
  for (Index a = 0; a < d.n_atoms; ++a) {
    auto const row = std::span<Cx>(d.atoms.data() + a * d.length, static_cast<std::size_t>(d.length));
    double const n = l2_norm(std::span<Cx const>(row));
    require(n > 0.0, "dictionary artifact: zero atom");
    for (auto &v : row) { v /= n; }
  }
  return d;
}

// k-space: c64 [n_tr, samples_per_tr].
inline ArrayContainer to_container(KSpace const &ks, nlohmann::json manifest)
{
  manifest["mode"] = ks.mode == SamplingMode::Cartesian ? "cartesian" : "spiral";
  manifest["matrix"] = ks.matrix;
  manifest["fisp"] = ks.spec;
  manifest["noise_sigma"] = ks.noise_sigma;
  ArrayContainer c{DType::C64, {ks.n_tr, ks.samples_per_tr}, "kspace", "a.u.", std::move(manifest), {}};
  detail::push_complex(c.values, ks.data);
  return c;
}

inline KSpace kspace_from(ArrayContainer const &c)
{
  detail::expect_role(c, "kspace");
  require(c.shape.size() == 2, "kspace artifact: bad shape");
  KSpace ks;
  try {
    ks.mode = c.manifest.at("mode").get<std::string>() == "cartesian" ? SamplingMode::Cartesian : SamplingMode::Spiral;
    ks.matrix = c.manifest.at("matrix").get<Index>();
    ks.spec = c.manifest.at("fisp").get<FispMrf>();
    ks.noise_sigma = c.manifest.at("noise_sigma").get<double>();
  } catch (nlohmann::json::exception const &e) {
    throw IoError(std::string("kspace manifest incomplete: ") + e.what());
  }
  ks.n_tr = c.shape[0];
  ks.samples_per_tr = c.shape[1];
  ks.data = detail::complex_values(c);
  return ks;
}

// MRF series: c64 [t, h, w], frame-major.
inline ArrayContainer to_container(MrfSeries const &s, nlohmann::json manifest)
{
  manifest["fisp"] = s.spec;
  manifest["normalization"] = s.normalization;
  ArrayContainer c{DType::C64, {s.t, s.h, s.w}, "mrf_series", "normalized a.u.", std::move(manifest), {}};
  detail::push_complex(c.values, s.data);
  return c;
}

inline MrfSeries series_from(ArrayContainer const &c)
{
  detail::expect_role(c, "mrf_series");
  require(c.shape.size() == 3, "series artifact: bad shape");
  MrfSeries s;
  try {
    s = MrfSeries(c.shape[0], c.shape[1], c.shape[2], c.manifest.at("fisp").get<FispMrf>());
    s.normalization = c.manifest.at("normalization").get<double>();
  } catch (nlohmann::json::exception const &e) {
    throw IoError(std::string("series manifest incomplete: ") + e.what());
  }
  s.data = detail::complex_values(c);
  return s;
}

// Parameter maps: [5, h, w] planes t1, t2, pd, similarity, atom index (-1 = null).
inline ArrayContainer to_container(MatchMaps const &m, nlohmann::json manifest)
{
  ArrayContainer c{DType::F32, {5, m.t1.h, m.t1.w}, "maps", "planes: t1 ms, t2 ms, pd, similarity, atom index",
                   std::move(manifest), {}};
  for (auto const *img : {&m.t1, &m.t2, &m.pd, &m.similarity}) { detail::push_real(c.values, *img); }
  // Exact while the dictionary has fewer than 2^24 atoms.
  for (Index a : m.atom_index.data) { c.values.push_back(static_cast<float>(a)); }
  return c;
}

inline MatchMaps maps_from(ArrayContainer const &c)
{
  detail::expect_role(c, "maps");
  require(c.shape.size() == 3 && c.shape[0] == 5, "maps artifact: bad shape");
  MatchMaps m;
  m.t1 = detail::plane(c, 0);
  m.t2 = detail::plane(c, 1);
  m.pd = detail::plane(c, 2);
  m.similarity = detail::plane(c, 3);
  auto const idx = detail::plane(c, 4);
  m.atom_index = Image<Index>(idx.h, idx.w);
  for (std::size_t i = 0; i < idx.data.size(); ++i) { m.atom_index.data[i] = static_cast<Index>(idx.data[i]); }
  return m;
}

// Contrasts: [3, h, w] planes T1w, T2w, FLAIR.
inline ArrayContainer to_container(ContrastSet const &cs, nlohmann::json manifest)
{
  manifest["provenance"] = provenance_name(cs.provenance);
  manifest["contrast_specs"] = cs.specs;
  ArrayContainer c{DType::F32, {3, cs.t1w.h, cs.t1w.w}, "contrasts", "planes: T1w, T2w, FLAIR (a.u.)", std::move(manifest), {}};
  for (auto const *img : cs.images()) { detail::push_real(c.values, *img); }
  return c;
}

inline ContrastSet contrasts_from(ArrayContainer const &c)
{
  detail::expect_role(c, "contrasts");
  require(c.shape.size() == 3 && c.shape[0] == 3, "contrasts artifact: bad shape");
  ContrastSet cs;
  cs.t1w = detail::plane(c, 0);
  cs.t2w = detail::plane(c, 1);
  cs.flair = detail::plane(c, 2);
  try {
    cs.provenance = parse_provenance(c.manifest.at("provenance").get<std::string>());
    cs.specs = c.manifest.at("contrast_specs").get<ContrastSpecs>();
  } catch (nlohmann::json::exception const &e) {
    throw IoError(std::string("contrasts manifest incomplete: ") + e.what());
  }
  return cs;
}

/// Plain real array with caller-chosen shape and role (dataset planes, time averages).
inline ArrayContainer real_container(std::vector<Index> shape, std::string role, std::string units,
                                     std::vector<RealImage const *> const &planes, nlohmann::json manifest)
{
  ArrayContainer c{DType::F32, std::move(shape), std::move(role), std::move(units), std::move(manifest), {}};
  for (auto const *p : planes) { detail::push_real(c.values, *p); }
  require(c.values.size() == c.elements(), "real_container: planes do not fill the shape");
  return c;
}

} // namespace mrf
