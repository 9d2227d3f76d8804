#include "fbff/parameter.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fbff {

Parameter::Parameter(std::string n, ad::Matrix init)
    : name(std::move(n)),
      node(ad::variable(std::move(init))),
      first_moment(ad::Matrix::Zero(node.rows(), node.cols())),
      second_moment(ad::Matrix::Zero(node.rows(), node.cols())),
      max_second_moment(ad::Matrix::Zero(node.rows(), node.cols())) {}

Parameter& ParameterSet::add(const std::string& name, ad::Matrix init) {
  if (index_.count(name))
    throw std::invalid_argument("duplicate parameter name: " + name);
  index_[name] = params_.size();
  params_.push_back(std::make_unique<Parameter>(name, std::move(init)));
  return *params_.back();
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter " + name);
  return *params_[it->second];
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter " + name);
  return *params_[it->second];
}

std::vector<Parameter*> ParameterSet::select(
    const std::vector<std::string>& prefixes) {
  std::vector<Parameter*> out;
  for (auto& p : params_)
    for (const auto& prefix : prefixes)
      if (p->name.rfind(prefix, 0) == 0) {
        out.push_back(p.get());
        break;
      }
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->node.zero_grad();
}

void ParameterSet::set_requires_grad(bool on) {
  for (auto& p : params_) p->node.node()->requires_grad = on;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->node.size());
  return n;
}

Checkpoint Checkpoint::capture(const ParameterSet& params) {
  Checkpoint ck;
  for (const auto& p : params) ck.tensors[p->name] = p->value();
  return ck;
}

void Checkpoint::restore(ParameterSet& params) const {
  for (auto& p : params) {
    auto it = tensors.find(p->name);
    if (it == tensors.end())
      throw std::runtime_error("checkpoint lacks parameter " + p->name);
    if (it->second.rows() != p->value().rows() ||
        it->second.cols() != p->value().cols())
      throw std::runtime_error("checkpoint shape mismatch for " + p->name);
    p->mutable_value() = it->second;
  }
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << kMagic << ' ' << kVersion << '\n';
  out << "metadata " << metadata.size() << '\n';
  for (const auto& [k, v] : metadata) out << k << ' ' << v << '\n';
  out << "tensors " << tensors.size() << '\n';
  char buf[40];
  for (const auto& [name, m] : tensors) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kMagic) throw std::runtime_error("not a checkpoint: " + path.string());
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  Checkpoint ck;
  std::string tag;
  std::size_t count = 0;
  in >> tag >> count;
  if (tag != "metadata") throw std::runtime_error("corrupt checkpoint header");
  std::string line;
  std::getline(in, line);
  for (std::size_t i = 0; i < count; ++i) {
    std::getline(in, line);
    const auto space = line.find(' ');
    if (space == std::string::npos) throw std::runtime_error("corrupt metadata line");
    ck.metadata[line.substr(0, space)] = line.substr(space + 1);
  }
  in >> tag >> count;
  if (tag != "tensors") throw std::runtime_error("corrupt checkpoint body");
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    in >> name >> rows >> cols;
    ad::Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        std::string tok;
        in >> tok;
        m(r, c) = std::strtod(tok.c_str(), nullptr);
      }
    if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
    ck.tensors[name] = std::move(m);
  }
  return ck;
}

}  // namespace fbff
