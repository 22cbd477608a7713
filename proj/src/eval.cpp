#include "rankdehaze/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "rankdehaze/rng.hpp"
#include "rankdehaze/synth.hpp"

namespace rankdehaze::eval {

namespace fs = std::filesystem;

namespace {

void check_transmission(const TransmissionMap& t) {
  for (float v : t.data()) {
    if (!(v > 0.f && v <= 1.f)) {
      throw std::invalid_argument("eval case: transmission " + std::to_string(v) + " outside (0, 1]");
    }
  }
}

std::optional<fs::path> find_image(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".png", ".ppm", ".pgm", ".pnm"}) {
    const auto p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

std::string format_optional(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << *v;
  return s.str();
}

}  // namespace

RgbImage synthesize(const RgbImage& clear, const TransmissionMap& t, const Atmosphere& a) {
  if (!image::same_size(clear, t)) throw std::invalid_argument("synthesize: transmission size differs from image");
  RgbImage out(clear.width(), clear.height());
  for (int y = 0; y < clear.height(); ++y)
    for (int x = 0; x < clear.width(); ++x) {
      const double tt = t.at(x, y);
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = static_cast<float>(static_cast<double>(clear.at(x, y, c)) * tt + a[c] * (1.0 - tt));
      }
    }
  return out;
}

EvalCase make_constant_case(std::string name, RgbImage clear, double t) {
  if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("constant case: t = " + std::to_string(t) + " outside (0, 1]");
  EvalCase c;
  c.name = std::move(name);
  c.transmission = TransmissionMap(clear.width(), clear.height(), static_cast<float>(t));
  c.clear = std::move(clear);
  c.hazy = synthesize(c.clear, c.transmission, c.atmosphere);
  return c;
}

EvalCase make_disparity_case(std::string name, RgbImage clear, Plane disparity) {
  if (!image::same_size(clear, disparity)) throw std::invalid_argument("disparity case: disparity size differs from image");
  EvalCase c;
  c.name = std::move(name);
  c.transmission = TransmissionMap(clear.width(), clear.height());
  for (std::size_t i = 0; i < disparity.pixels(); ++i) {
    const float d = disparity.data()[i];
    if (!(d > 0.f && d <= 1.f)) {
      throw std::invalid_argument("disparity case: d = " + std::to_string(d) + " outside (0, 1]");
    }
    c.transmission.data()[i] = static_cast<float>(kDisparityScale * d);
  }
  check_transmission(c.transmission);
  c.clear = std::move(clear);
  c.disparity = std::move(disparity);
  c.hazy = synthesize(c.clear, c.transmission, c.atmosphere);
  return c;
}

Plane normalize_disparity(const Plane& raw) {
  float hi = 0.f, lo_pos = 0.f;
  for (float v : raw.data()) {
    hi = std::max(hi, v);
    if (v > 0.f && (lo_pos == 0.f || v < lo_pos)) lo_pos = v;
  }
  Plane out(raw.width(), raw.height(), 1.f);
  if (!(hi > 0.f)) return out;
  for (std::size_t i = 0; i < raw.pixels(); ++i) {
    const float v = raw.data()[i] > 0.f ? raw.data()[i] : lo_pos;
    out.data()[i] = std::clamp(v / hi, std::numeric_limits<float>::min(), 1.f);
  }
  return out;
}

std::vector<EvalCase> procedural_cases(std::size_t count, int width, int height, std::uint64_t seed) {
  const auto textures = synth::procedural_images(count, width, height, derive_seed(seed, 1));
  const int sky = height / 4;
  std::vector<EvalCase> cases;
  for (std::size_t i = 0; i < count; ++i) {
    RgbImage clear = textures[i];
    for (int y = 0; y < sky; ++y)
      for (int x = 0; x < width; ++x) {
        const float v = 0.86f + 0.1f * static_cast<float>(y) / static_cast<float>(std::max(1, sky));
        clear.set(x, y, {v, std::min(1.f, v + 0.03f), 1.f});
      }
    const std::string name = "case" + std::to_string(i + 1);
    if (i < (count + 1) / 2) {
      const double t = 0.35 + 0.45 * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(1, (count + 1) / 2 - 1));
      cases.push_back(make_constant_case(name + "-const", std::move(clear), t));
    } else {
      Plane d(width, height);
      for (int y = 0; y < height; ++y) {
        const float v = 0.4f + 0.6f * static_cast<float>(y) / static_cast<float>(std::max(1, height - 1));
        for (int x = 0; x < width; ++x) d.at(x, y) = v;
      }
      cases.push_back(make_disparity_case(name + "-ramp", std::move(clear), std::move(d)));
    }
  }
  return cases;
}

std::vector<EvalCase> load_cases(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("case directory " + dir.string() + " does not exist");
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) subdirs.push_back(e.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  std::vector<EvalCase> cases;
  for (const auto& sub : subdirs) {
    const auto clear_path = find_image(sub, "clear");
    if (!clear_path) continue;
    RgbImage clear = image::read_image(*clear_path);
    std::optional<double> t;
    if (fs::exists(sub / "meta.txt")) {
      std::ifstream meta(sub / "meta.txt");
      std::string line;
      while (std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
        if (key == "t") t = std::stod(value);
      }
    }
    const auto disp_path = find_image(sub, "disparity");
    if (disp_path && !t) {
      Plane d = normalize_disparity(image::read_plane(*disp_path));
      cases.push_back(make_disparity_case(sub.filename().string(), std::move(clear), std::move(d)));
    } else {
      cases.push_back(make_constant_case(sub.filename().string(), std::move(clear), t.value_or(0.6)));
    }
  }
  if (cases.empty()) throw std::invalid_argument("no cases (subdirectories with clear.png) in " + dir.string());
  return cases;
}

double l1_transmission(const TransmissionMap& estimate, const TransmissionMap& truth) {
  if (!image::same_size(estimate, truth)) throw std::invalid_argument("l1_transmission: dimensions differ");
  if (truth.pixels() == 0) throw std::invalid_argument("l1_transmission: empty map");
  double s = 0;
  for (std::size_t i = 0; i < truth.pixels(); ++i) s += std::abs(double(estimate.data()[i]) - double(truth.data()[i]));
  return s / static_cast<double>(truth.pixels());
}

double l1_image(const RgbImage& output, const RgbImage& clear) {
  if (!image::same_size(output, clear)) throw std::invalid_argument("l1_image: dimensions differ");
  if (clear.empty()) throw std::invalid_argument("l1_image: empty image");
  double s = 0;
  for (std::size_t i = 0; i < clear.data().size(); ++i) s += std::abs(double(output.data()[i]) - double(clear.data()[i]));
  return s / static_cast<double>(clear.data().size());
}

Method noop_method() {
  return {"no-op", [](const EvalCase& c) { return MethodOutput{c.hazy, std::nullopt}; }};
}

Method oracle_method() {
  return {"oracle", [](const EvalCase& c) {
            return MethodOutput{dehaze::recover(c.hazy, c.atmosphere, c.transmission), c.transmission};
          }};
}

Method pipeline_method(const net::RankingCnn& model, const rf::Forest& forest, const dehaze::DehazeOptions& options,
                       std::string name) {
  return {std::move(name), [&model, &forest, options](const EvalCase& c) {
            auto r = dehaze::dehaze(c.hazy, model, forest, options);
            return MethodOutput{std::move(r.output), std::move(r.transmission)};
          }};
}

const CaseResult& EvalReport::at(const std::string& case_name, const std::string& method) const {
  for (const auto& r : rows) {
    if (r.case_name == case_name && r.method == method) return r;
  }
  throw std::out_of_range("no result for case " + case_name + ", method " + method);
}

double EvalReport::mean_l1_image(const std::string& method) const {
  double s = 0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.method == method && !r.failed) {
      s += r.l1_image;
      ++n;
    }
  }
  return n ? s / static_cast<double>(n) : std::nan("");
}

std::optional<double> EvalReport::mean_l1_transmission(const std::string& method) const {
  double s = 0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.method == method && !r.failed && r.l1_transmission) {
      s += *r.l1_transmission;
      ++n;
    }
  }
  if (!n) return std::nullopt;
  return s / static_cast<double>(n);
}

std::size_t EvalReport::failures(const std::string& method) const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.method == method && r.failed;
  return n;
}

EvalReport benchmark_methods(const std::vector<EvalCase>& cases, const std::vector<Method>& methods, std::ostream* log) {
  if (cases.empty() || methods.empty()) throw std::invalid_argument("benchmark needs at least one case and one method");
  EvalReport report;
  for (const auto& m : methods) report.methods.push_back(m.name);
  for (const auto& c : cases) {
    report.cases.push_back(c.name);
    for (const auto& m : methods) {
      CaseResult r;
      r.case_name = c.name;
      r.method = m.name;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const auto out = m.run(c);
        r.l1_image = l1_image(out.image, c.clear);
        if (out.transmission) r.l1_transmission = l1_transmission(*out.transmission, c.transmission);
      } catch (const std::exception& e) {
        r.failed = true;
        r.error = e.what();
        if (log) *log << "warning: " << m.name << " failed on " << c.name << ": " << e.what() << "\n";
      }
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (log && !r.failed) {
        *log << c.name << "  " << m.name << "  L1(t) " << format_optional(r.l1_transmission) << "  L1(img) "
             << std::fixed << std::setprecision(4) << r.l1_image << std::defaultfloat << "\n";
      }
      report.rows.push_back(std::move(r));
    }
  }
  return report;
}

void write_csv(std::ostream& out, const EvalReport& report) {
  out << "case,method,l1_transmission,l1_image,failed\n" << std::setprecision(9);
  for (const auto& r : report.rows) {
    out << r.case_name << "," << r.method << ",";
    if (r.l1_transmission) out << *r.l1_transmission;
    out << ",";
    if (!r.failed) out << r.l1_image;
    out << "," << (r.failed ? 1 : 0) << "\n";
  }
  for (const auto& m : report.methods) {
    out << "average," << m << ",";
    if (const auto t = report.mean_l1_transmission(m)) out << *t;
    out << "," << report.mean_l1_image(m) << "," << report.failures(m) << "\n";
  }
}

void write_text(std::ostream& out, const EvalReport& report) {
  std::size_t wc = 7;
  for (const auto& c : report.cases) wc = std::max(wc, c.size());
  out << "L1 error in transmission / L1 error in image\n";
  out << std::left << std::setw(static_cast<int>(wc) + 2) << "case";
  for (const auto& m : report.methods) out << std::setw(22) << m;
  out << "\n";
  const auto cell = [](const std::optional<double>& t, std::optional<double> img) {
    return format_optional(t) + " / " + (img ? format_optional(img) : std::string("failed"));
  };
  for (const auto& c : report.cases) {
    out << std::setw(static_cast<int>(wc) + 2) << c;
    for (const auto& m : report.methods) {
      const auto& r = report.at(c, m);
      out << std::setw(22) << cell(r.l1_transmission, r.failed ? std::nullopt : std::optional<double>(r.l1_image));
    }
    out << "\n";
  }
  out << std::setw(static_cast<int>(wc) + 2) << "average";
  for (const auto& m : report.methods) out << std::setw(22) << cell(report.mean_l1_transmission(m), report.mean_l1_image(m));
  out << "\n" << std::right;
  double total = 0;
  for (const auto& r : report.rows) total += r.seconds;
  out << "runtime " << std::fixed << std::setprecision(2) << total << " s\n" << std::defaultfloat;
}

}  // namespace rankdehaze::eval
