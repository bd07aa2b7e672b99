#include "gsflow/robustflow.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace gsflow {

double loglogistic_pdf(double r, const RobustFlowModel& model) {
  const double a = model.alpha, b = model.beta;
  if (b > 1.0) r = std::max(r, model.epsilon_r);
  if (r < 0.0) throw std::invalid_argument("loglogistic_pdf: negative residual");
  if (r == 0.0) return b == 1.0 ? 1.0 / a : (b > 1.0 ? 0.0 : std::numeric_limits<double>::infinity());
  const double x = r / a;
  const double xb = std::pow(x, b);
  const double denom = 1.0 + xb;
  return (b / a) * std::pow(x, b - 1.0) / (denom * denom);
}

double loglogistic_pdf_deriv(double r, const RobustFlowModel& model) {
  const double a = model.alpha, b = model.beta;
  if (b > 1.0 && r < model.epsilon_r) return 0.0;  // flat below the floor
  const double x = std::max(r, 1e-300) / a;
  const double xb = std::pow(x, b);
  // f = (b/a) x^{b-1} (1+x^b)^{-2}; log-derivative (b-1)/r - 2 b x^b / (r (1+x^b))
  const double f = loglogistic_pdf(r, model);
  return f * ((b - 1.0) / (x * a) - 2.0 * b * xb / (x * a * (1.0 + xb)));
}

double flow_psi(double r, const RobustFlowModel& model) {
  const double f = loglogistic_pdf(r, model);
  if (std::isinf(f)) return 0.0;  // beta < 1 pole at r = 0: f/(f+nu) -> 1
  return -std::log(f / (f + model.nu));
}

double flow_psi_deriv(double r, const RobustFlowModel& model) {
  const double f = loglogistic_pdf(r, model);
  if (std::isinf(f)) return 0.0;
  const double fp = loglogistic_pdf_deriv(r, model);
  // psi = -log f + log(f + nu)
  return -fp / f + fp / (f + model.nu);
}

FlowLossOutput flow_loss(const FlowField& zeta, const FlowField& observed,
                         const RobustFlowModel& model) {
  if (zeta.width != observed.width || zeta.height != observed.height)
    throw std::runtime_error("flow_loss: field dimensions mismatch");
  const int w = zeta.width, h = zeta.height;

  FlowLossOutput out;
  out.psi_map = GridXd::Zero(h, w);
  out.f_map = GridXd::Zero(h, w);
  out.dL_dzeta = Image2::Zero(static_cast<Eigen::Index>(w) * h, 2);

  double total = 0.0;  // fixed-order accumulation, row major
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!zeta.validity(y, x) || !observed.validity(y, x)) continue;
      const double q = observed.confidence(y, x);
      const Eigen::Index px = pixel_index(x, y, w);
      const Vec2 diff = (zeta.flow.row(px) - observed.flow.row(px)).transpose();
      const double r = diff.norm();
      const double psi = flow_psi(r, model);
      out.psi_map(y, x) = psi;
      out.f_map(y, x) = q * psi;
      total += q * psi;
      if (q > 0.0 && r >= 1e-8)
        out.dL_dzeta.row(px) = (q * flow_psi_deriv(r, model) / r) * diff.transpose();
    }
  }
  out.total = total;
  return out;
}

namespace {

void write_u32(std::ostream& s, std::uint32_t v) { s.write(reinterpret_cast<const char*>(&v), 4); }
void write_f32(std::ostream& s, float v) { s.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t read_u32(std::istream& s) {
  std::uint32_t v = 0;
  s.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

float read_f32(std::istream& s) {
  float v = 0;
  s.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void write_flow_file(const std::string& path, const FlowField& field) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_flow_file: cannot open " + path);
  f.write("GFLO", 4);
  write_u32(f, static_cast<std::uint32_t>(field.width));
  write_u32(f, static_cast<std::uint32_t>(field.height));
  for (Eigen::Index px = 0; px < field.flow.rows(); ++px) {
    write_f32(f, static_cast<float>(field.flow(px, 0)));
    write_f32(f, static_cast<float>(field.flow(px, 1)));
  }
  for (int y = 0; y < field.height; ++y)
    for (int x = 0; x < field.width; ++x)
      write_f32(f, field.validity(y, x) ? static_cast<float>(field.confidence(y, x)) : 0.0f);
  if (!f) throw std::runtime_error("write_flow_file: write failed for " + path);
}

FlowField read_flow_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_flow_file: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "GFLO", 4) != 0)
    throw std::runtime_error("read_flow_file: bad magic in " + path);
  const int w = static_cast<int>(read_u32(f));
  const int h = static_cast<int>(read_u32(f));
  if (w <= 0 || h <= 0) throw std::runtime_error("read_flow_file: bad dimensions in " + path);
  FlowField field = FlowField::zeros(w, h);
  for (Eigen::Index px = 0; px < field.flow.rows(); ++px) {
    field.flow(px, 0) = read_f32(f);
    field.flow(px, 1) = read_f32(f);
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double c = read_f32(f);
      field.confidence(y, x) = c;
      field.validity(y, x) = c > 0.0 && std::isfinite(field.flow(pixel_index(x, y, w), 0)) &&
                             std::isfinite(field.flow(pixel_index(x, y, w), 1));
    }
  }
  if (!f) throw std::runtime_error("read_flow_file: truncated file " + path);
  return field;
}

}  // namespace gsflow
