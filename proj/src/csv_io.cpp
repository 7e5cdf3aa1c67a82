#include "sipmstat/csv_io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace sipmstat {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

bool is_data_line(const std::string& line) {
  for (char ch : line) {
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    return std::isdigit(static_cast<unsigned char>(ch)) || ch == '-' ||
           ch == '+' || ch == '.';
  }
  return false;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

double parse_double(const std::string& s, const std::string& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    return v;
  } catch (const std::exception&) {
    throw IoError("bad numeric field '" + s + "' in " + path);
  }
}

std::int64_t parse_int(const std::string& s, const std::string& path) {
  try {
    return std::stoll(s);
  } catch (const std::exception&) {
    throw IoError("bad integer field '" + s + "' in " + path);
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CountHistogram read_count_histogram_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  CountHistogram h;
  std::string line;
  while (std::getline(in, line)) {
    if (!is_data_line(line)) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 2) throw IoError("expected 'n,count' rows in " + path);
    const std::int64_t n = parse_int(fields[0], path);
    const std::int64_t c = parse_int(fields[1], path);
    if (n < 0 || c < 0) throw IoError("negative value in " + path);
    if (static_cast<std::size_t>(n) >= h.counts.size()) {
      h.counts.resize(static_cast<std::size_t>(n) + 1, 0);
    }
    h.counts[static_cast<std::size_t>(n)] += c;
  }
  if (h.counts.empty()) throw IoError("no histogram rows in " + path);
  return h;
}

void write_count_histogram_csv(const std::string& path,
                               const CountHistogram& h) {
  std::ofstream out = open_output(path);
  out << "n,count\n";
  for (std::size_t n = 0; n < h.counts.size(); ++n) {
    out << n << ',' << h.counts[n] << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_prob_vec_csv(const std::string& path, const ProbVec& p) {
  std::ofstream out = open_output(path);
  out << "n,prob\n";
  for (std::size_t n = 0; n < p.size(); ++n) {
    out << n << ',' << format_double(p[n]) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

PulseHistogram read_pulse_histogram_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<double> lefts;
  std::vector<std::int64_t> counts;
  std::string line;
  while (std::getline(in, line)) {
    if (!is_data_line(line)) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 2) {
      throw IoError("expected 'bin_left,count' rows in " + path);
    }
    lefts.push_back(parse_double(fields[0], path));
    counts.push_back(parse_int(fields[1], path));
  }
  if (lefts.size() < 2) throw IoError("need at least 2 bins in " + path);

  PulseHistogram h;
  h.bin_edges = lefts;
  h.bin_edges.push_back(lefts.back() + (lefts[1] - lefts[0]));
  h.bin_counts = std::move(counts);
  h.validate();
  return h;
}

void write_pulse_histogram_csv(const std::string& path,
                               const PulseHistogram& h) {
  h.validate();
  std::ofstream out = open_output(path);
  out << "bin_left,count\n";
  for (std::size_t b = 0; b < h.bin_counts.size(); ++b) {
    out << format_double(h.bin_edges[b]) << ',' << h.bin_counts[b] << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<StimPoint> read_stim_points_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<StimPoint> points;
  std::string line;
  while (std::getline(in, line)) {
    if (!is_data_line(line)) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 3) {
      throw IoError("expected 'intensity,n_bar,err' rows in " + path);
    }
    points.push_back({parse_double(fields[0], path),
                      parse_double(fields[1], path),
                      parse_double(fields[2], path)});
  }
  if (points.empty()) throw IoError("no stimulation rows in " + path);
  return points;
}

void write_stim_points_csv(const std::string& path,
                           const std::vector<StimPoint>& points) {
  std::ofstream out = open_output(path);
  out << "intensity,n_bar,err\n";
  for (const auto& pt : points) {
    out << format_double(pt.intensity) << ',' << format_double(pt.n_bar) << ','
        << format_double(pt.err) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

DetectorParams read_detector_params_json(const std::string& path) {
  std::ifstream in = open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("bad params json in " + path + ": " + e.what());
  }
  DetectorParams p;
  try {
    p.eta = j.at("eta").get<double>();
    p.lambda_dk = j.at("lambda_dk").get<double>();
    p.epsilon = j.at("epsilon").get<double>();
  } catch (const std::exception& e) {
    throw IoError("missing params field in " + path + ": " + e.what());
  }
  if (j.contains("provenance")) {
    const auto& prov = j["provenance"];
    p.eta_source = prov.value("eta", "");
    p.lambda_source = prov.value("lambda_dk", "");
    p.epsilon_source = prov.value("epsilon", "");
  }
  p.validate();
  return p;
}

void write_detector_params_json(const std::string& path,
                                const DetectorParams& params) {
  nlohmann::json j;
  j["eta"] = params.eta;
  j["lambda_dk"] = params.lambda_dk;
  j["epsilon"] = params.epsilon;
  nlohmann::json prov;
  if (!params.eta_source.empty()) prov["eta"] = params.eta_source;
  if (!params.lambda_source.empty()) prov["lambda_dk"] = params.lambda_source;
  if (!params.epsilon_source.empty()) prov["epsilon"] = params.epsilon_source;
  if (!prov.empty()) j["provenance"] = prov;

  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::string fit_result_text(const FitResult& fit) {
  std::ostringstream os;
  for (const auto& p : fit.params) {
    os << "param." << p.name << ".value=" << format_double(p.value) << '\n';
    os << "param." << p.name << ".stderr=" << format_double(p.std_error)
       << '\n';
  }
  os << "log_likelihood=" << format_double(fit.log_likelihood) << '\n';
  os << "converged=" << (fit.converged ? "true" : "false") << '\n';
  if (fit.gof) {
    os << "gof.chi2=" << format_double(fit.gof->chi2) << '\n';
    os << "gof.dof=" << fit.gof->dof << '\n';
    os << "gof.p_value=" << format_double(fit.gof->p_value) << '\n';
  }
  for (const auto& f : fit.flags) os << "flag=" << f << '\n';
  return os.str();
}

std::string fit_result_json(const FitResult& fit) {
  nlohmann::json j;
  for (const auto& p : fit.params) {
    j["params"][p.name] = {{"value", p.value}, {"stderr", p.std_error}};
  }
  j["log_likelihood"] = fit.log_likelihood;
  j["converged"] = fit.converged;
  if (fit.gof) {
    j["gof"] = {{"chi2", fit.gof->chi2},
                {"dof", fit.gof->dof},
                {"p_value", fit.gof->p_value}};
  }
  j["flags"] = fit.flags;
  const int dim = static_cast<int>(fit.covariance.rows());
  for (int i = 0; i < dim; ++i) {
    std::vector<double> row;
    for (int k = 0; k < dim; ++k) row.push_back(fit.covariance(i, k));
    j["covariance"].push_back(row);
  }
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out = open_output(path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace sipmstat
