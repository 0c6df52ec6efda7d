#include "ssmnar/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ssmnar {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  return out;
}

}  // namespace

void write_dataset(const std::string& path, const Dataset& dataset) {
  validate(dataset);
  auto out = open_output(path);
  out << "d=" << dataset.dim() << " K=" << dataset.num_classes << "\n";
  for (int i = 0; i < dataset.size(); ++i) {
    for (int j = 0; j < dataset.dim(); ++j)
      out << format_double(dataset.features(i, j)) << " ";
    if (dataset.indicator[i])
      out << (dataset.labels[i] + 1);  // 1-based in files
    else
      out << "NA";
    out << " " << int(dataset.indicator[i]) << "\n";
  }
}

Dataset read_dataset(const std::string& path) {
  auto in = open_input(path);
  std::string header;
  std::getline(in, header);
  int d = 0, k = 0;
  if (std::sscanf(header.c_str(), "d=%d K=%d", &d, &k) != 2 || d < 1 || k < 1)
    throw ValidationError("dataset file: bad header in " + path);

  std::vector<double> values;
  std::vector<int> labels;
  std::vector<std::uint8_t> indicator;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    for (int j = 0; j < d; ++j) {
      double v;
      if (!(row >> v))
        throw ValidationError("dataset file: bad feature at line " +
                              std::to_string(lineno));
      values.push_back(v);
    }
    std::string label_tok;
    int r;
    if (!(row >> label_tok >> r))
      throw ValidationError("dataset file: bad label/indicator at line " +
                            std::to_string(lineno));
    if (label_tok == "NA") {
      labels.push_back(kMissingLabel);
    } else {
      labels.push_back(std::stoi(label_tok) - 1);
    }
    indicator.push_back(static_cast<std::uint8_t>(r));
  }

  Dataset dataset;
  dataset.num_classes = k;
  const int n = static_cast<int>(labels.size());
  dataset.features.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) dataset.features(i, j) = values[i * d + j];
  dataset.labels = std::move(labels);
  dataset.indicator = std::move(indicator);
  validate(dataset);
  return dataset;
}

void write_truth(const std::string& path, const SealedTruth& truth,
                 int num_classes) {
  auto out = open_output(path);
  out << "K=" << num_classes << "\n";
  if (truth.true_phi) {
    out << "phi";
    for (Eigen::Index i = 0; i < truth.true_phi->size(); ++i)
      out << " " << format_double((*truth.true_phi)(i));
    out << "\n";
  } else {
    out << "phi none\n";
  }
  for (int label : truth.labels) out << (label + 1) << "\n";
}

SealedTruth read_truth(const std::string& path) {
  auto in = open_input(path);
  std::string header;
  std::getline(in, header);
  int k = 0;
  if (std::sscanf(header.c_str(), "K=%d", &k) != 1 || k < 1)
    throw ValidationError("truth file: bad header in " + path);
  std::string phi_line;
  std::getline(in, phi_line);
  SealedTruth truth;
  std::istringstream phi_row(phi_line);
  std::string tag;
  phi_row >> tag;
  if (tag != "phi") throw ValidationError("truth file: missing phi line");
  std::vector<double> phi;
  std::string tok;
  while (phi_row >> tok) {
    if (tok == "none") break;
    phi.push_back(std::stod(tok));
  }
  if (!phi.empty())
    truth.true_phi =
        Eigen::Map<Eigen::VectorXd>(phi.data(), static_cast<Eigen::Index>(phi.size()));
  int label;
  while (in >> label) truth.labels.push_back(label - 1);
  return truth;
}

void save_model(const std::string& path, const ModelParams& theta) {
  auto out = open_output(path);
  if (theta.arch == Architecture::LinearSoftmax)
    out << "linear " << theta.input_dim << " " << theta.num_classes << "\n";
  else
    out << "hidden " << theta.input_dim << " " << theta.num_classes << " "
        << theta.hidden_width << "\n";
  const Eigen::VectorXd flat = theta.flatten();
  for (Eigen::Index i = 0; i < flat.size(); ++i)
    out << format_double(flat(i)) << "\n";
}

ModelParams load_model(const std::string& path) {
  auto in = open_input(path);
  std::string arch;
  in >> arch;
  ModelParams theta;
  if (arch == "linear") {
    int d, k;
    if (!(in >> d >> k)) throw ValidationError("model file: bad header");
    theta = ModelParams::linear(d, k);
  } else if (arch == "hidden") {
    int d, k, h;
    if (!(in >> d >> k >> h)) throw ValidationError("model file: bad header");
    theta = ModelParams::hidden(d, k, h);
  } else {
    throw ValidationError("model file: unknown architecture '" + arch + "'");
  }
  Eigen::VectorXd flat(theta.parameter_count());
  for (Eigen::Index i = 0; i < flat.size(); ++i)
    if (!(in >> flat(i)))
      throw ValidationError("model file: truncated parameter array");
  theta.unflatten(flat);
  return theta;
}

}  // namespace ssmnar
