#include "misc/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "misc/config.hpp"
#include "misc/errors.hpp"
#include "misc/image_io.hpp"
#include "misc/mten.hpp"
#include "misc/rng.hpp"

namespace misc::data {

namespace fs = std::filesystem;

bool ManifestEntry::validation() const { return fnv1a64(id) % 10 == 0; }

Tensor augment(const Tensor& image, int code) {
  const int C = image.channels(), H = image.height(), W = image.width();
  const bool hflip = code & 1, vflip = code & 2, transpose = code & 4;
  if (transpose && H != W) throw InputError("augment: transpose needs a square image");
  Tensor out(image.shape());
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        int sy = transpose ? x : y, sx = transpose ? y : x;
        if (vflip) sy = H - 1 - sy;
        if (hflip) sx = W - 1 - sx;
        out(c, y, x) = image(c, sy, sx);
      }
    }
  }
  return out;
}

namespace {

Tensor crop(const Tensor& img, int y0, int x0, int h, int w) {
  Tensor out({img.channels(), h, w});
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out(c, y, x) = img(c, y0 + y, x0 + x);
    }
  }
  return out;
}

std::string make_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", i);
  return buf;
}

}  // namespace

std::string format_manifest_line(const ManifestEntry& e) {
  return "id=" + e.id + " sharp=" + e.sharp + " blurred=" + e.blurred + " length=" + format_double(e.length) +
         " angle=" + format_double(e.angle) + " sigma=" + format_double(e.sigma) + " seed=" + std::to_string(e.seed);
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::string text;
  for (const auto& e : entries) text += format_manifest_line(e) + "\n";
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    KeyValues kv;
    std::istringstream fields(line);
    std::string field;
    while (fields >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) throw IoError(where + ": malformed field '" + field + "'");
      kv[field.substr(0, eq)] = field.substr(eq + 1);
    }
    ManifestEntry e;
    try {
      e.id = kv.at("id");
      e.sharp = kv.at("sharp");
      e.blurred = kv.at("blurred");
      e.length = parse_double("length", kv.at("length"));
      e.angle = parse_double("angle", kv.at("angle"));
      e.sigma = parse_double("sigma", kv.at("sigma"));
      e.seed = std::stoull(kv.at("seed"));
    } catch (const std::out_of_range&) {
      throw IoError(where + ": missing field (need id, sharp, blurred, length, angle, sigma, seed)");
    } catch (const std::exception& ex) {
      throw IoError(where + ": " + ex.what());
    }
    out.push_back(std::move(e));
  }
  return out;
}

SynthReport generate_dataset(const SynthOptions& o) {
  if (o.count < 0) throw ConfigError("count must be >= 0");
  if (o.patch < 8) throw ConfigError("patch must be >= 8");
  if (!(o.min_length >= 1) || o.max_length < o.min_length || o.max_length > blur::kDefaultMaxLength) {
    throw ConfigError("blur length range must satisfy 1 <= min <= max <= " + format_double(blur::kDefaultMaxLength));
  }
  if (!(o.min_sigma >= 0) || o.max_sigma < o.min_sigma) throw ConfigError("noise range must satisfy 0 <= min <= max");

  // Blur a larger window and keep its center so the patch border never sees
  // the replicate padding.
  const int margin = static_cast<int>(std::ceil(o.max_length / 2)) + 1;
  const int window = o.patch + 2 * margin;

  SynthReport report;
  std::vector<Tensor> sources;
  if (!o.source_dir.empty()) {
    std::vector<fs::path> files;
    for (const auto& de : fs::directory_iterator(o.source_dir)) {
      if (de.is_regular_file()) files.push_back(de.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        auto img = read_png(f);
        if (img.height() < window || img.width() < window) {
          ++report.skipped_sources;
          continue;
        }
        sources.push_back(std::move(img));
      } catch (const IoError&) {
        ++report.skipped_sources;
      }
    }
  }

  fs::create_directories(o.out_dir / "sharp");
  fs::create_directories(o.out_dir / "blurred");
  report.entries.resize(static_cast<std::size_t>(o.count));

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < o.count; ++i) {
    const auto id = make_id(i);
    auto rng = make_rng(o.seed, "item:" + id);
    Tensor base;
    if (sources.empty()) {
      base = blur::procedural_image(window, window, rng());
    } else {
      const auto& src = sources[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(sources.size()) - 1))];
      const int y0 = uniform_int(rng, 0, src.height() - window);
      const int x0 = uniform_int(rng, 0, src.width() - window);
      base = crop(src, y0, x0, window, window);
    }
    base = augment(base, uniform_int(rng, 0, 7));

    ManifestEntry e;
    e.id = id;
    e.sharp = "sharp/" + id + ".png";
    e.blurred = "blurred/" + id + ".png";
    e.length = uniform(rng, o.min_length, o.max_length);
    e.angle = uniform(rng, 0, std::numbers::pi);
    e.sigma = uniform(rng, o.min_sigma, o.max_sigma);
    e.seed = rng();

    blur::BlurSpec spec;
    spec.motion = {e.length, e.angle};
    spec.noise_sigma = e.sigma;
    const auto blurred = blur::apply_blur(base, spec, e.seed);
    write_png(o.out_dir / e.sharp, crop(base, margin, margin, o.patch, o.patch));
    write_png(o.out_dir / e.blurred, crop(blurred, margin, margin, o.patch, o.patch));
    report.entries[static_cast<std::size_t>(i)] = std::move(e);
  }
  write_manifest(o.out_dir / "manifest.txt", report.entries);
  return report;
}

Dataset load_dataset(const fs::path& manifest_path) {
  const auto entries = read_manifest(manifest_path);
  const auto dir = manifest_path.parent_path();
  Dataset ds;
  for (const auto& e : entries) {
    Sample s{e.id, read_png(dir / e.sharp), read_png(dir / e.blurred)};
    if (s.sharp.shape() != s.blurred.shape()) {
      throw IoError("pair " + e.id + ": sharp " + shape_str(s.sharp.shape()) + " vs blurred " +
                    shape_str(s.blurred.shape()));
    }
    (e.validation() ? ds.validation : ds.train).push_back(std::move(s));
  }
  return ds;
}

}  // namespace misc::data
