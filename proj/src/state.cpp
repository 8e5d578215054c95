#include "poisbound/state.hpp"

#include <algorithm>
#include <sstream>

#include "poisbound/errors.hpp"

namespace poisbound {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidParam: return "InvalidParam";
    case ErrorCode::kZeroExitRate: return "ZeroExitRate";
    case ErrorCode::kSingularInner: return "SingularInner";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kTruncationTooSmall: return "TruncationTooSmall";
    case ErrorCode::kDegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::kReducible: return "Reducible";
    case ErrorCode::kMissingExact: return "MissingExact";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kCertificateFailure: return "CertificateFailure";
  }
  return "Unknown";
}

State::State(std::initializer_list<int> xs) {
  if (xs.size() == 0 || xs.size() > kMaxDim) throw InvalidParam("state dimension out of range");
  dim = static_cast<int>(xs.size());
  std::copy(xs.begin(), xs.end(), coord.begin());
}

State State::of(std::span<const int> xs) {
  if (xs.empty() || xs.size() > kMaxDim) throw InvalidParam("state dimension out of range");
  State s;
  s.dim = static_cast<int>(xs.size());
  std::copy(xs.begin(), xs.end(), s.coord.begin());
  return s;
}

std::string to_string(const State& x) {
  std::string out;
  for (int i = 0; i < x.dim; ++i) {
    if (i) out += ':';
    out += std::to_string(x[i]);
  }
  return out;
}

State parse_state(const std::string& text) {
  std::vector<int> xs;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ':')) {
    try {
      std::size_t used = 0;
      xs.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw InvalidParam("malformed state '" + text + "'");
    }
  }
  return State::of(xs);
}

StateCoder::StateCoder(std::vector<int> upper) : upper_(std::move(upper)) {
  if (upper_.empty() || upper_.size() > kMaxDim) throw InvalidParam("coder dimension out of range");
  stride_.assign(upper_.size(), 1);
  size_ = 1;
  for (std::size_t i = upper_.size(); i-- > 0;) {
    if (upper_[i] < 0) throw InvalidParam("coder extent must be nonnegative");
    stride_[i] = size_;
    size_ *= static_cast<std::size_t>(upper_[i]) + 1;
  }
}

bool StateCoder::contains(const State& x) const {
  if (x.dim != dimension()) return false;
  for (int i = 0; i < x.dim; ++i)
    if (x[i] < 0 || x[i] > upper_[static_cast<std::size_t>(i)]) return false;
  return true;
}

std::size_t StateCoder::encode(const State& x) const {
  if (!contains(x)) throw InvalidParam("state " + to_string(x) + " outside coder envelope");
  std::size_t idx = 0;
  for (int i = 0; i < x.dim; ++i) idx += static_cast<std::size_t>(x[i]) * stride_[static_cast<std::size_t>(i)];
  return idx;
}

State StateCoder::decode(std::size_t index) const {
  if (index >= size_) throw InvalidParam("index outside coder envelope");
  State x;
  x.dim = dimension();
  for (std::size_t i = 0; i < upper_.size(); ++i) {
    x.coord[i] = static_cast<int>(index / stride_[i]);
    index %= stride_[i];
  }
  return x;
}

State StateCoder::clamp(const State& x) const {
  State y = x;
  for (int i = 0; i < x.dim; ++i) y[i] = std::clamp(x[i], 0, upper_[static_cast<std::size_t>(i)]);
  return y;
}

StateSet::StateSet(std::vector<State> states) : states_(std::move(states)) {
  std::sort(states_.begin(), states_.end());
  states_.erase(std::unique(states_.begin(), states_.end()), states_.end());
  if (states_.empty()) return;
  const int dim = states_.front().dim;
  std::vector<int> upper(static_cast<std::size_t>(dim), 0);
  for (const auto& s : states_) {
    if (s.dim != dim) throw InvalidParam("mixed state dimensions in set");
    for (int i = 0; i < dim; ++i) {
      if (s[i] < 0) throw InvalidParam("negative coordinate in state " + to_string(s));
      upper[static_cast<std::size_t>(i)] = std::max(upper[static_cast<std::size_t>(i)], s[i]);
    }
  }
  bbox_ = StateCoder(upper);
  lookup_.assign(bbox_.size(), -1);
  for (std::size_t i = 0; i < states_.size(); ++i) lookup_[bbox_.encode(states_[i])] = static_cast<long>(i);
}

StateSet StateSet::box(const std::vector<int>& upper) {
  return filter(upper, [](const State&) { return true; });
}

StateSet StateSet::filter(const std::vector<int>& upper, const std::function<bool(const State&)>& keep) {
  StateCoder coder(upper);
  std::vector<State> out;
  for (std::size_t i = 0; i < coder.size(); ++i) {
    State x = coder.decode(i);
    if (keep(x)) out.push_back(x);
  }
  return StateSet(std::move(out));
}

long StateSet::index_of(const State& x) const {
  if (states_.empty() || !bbox_.contains(x)) return -1;
  return lookup_[bbox_.encode(x)];
}

std::vector<int> StateSet::upper_corner() const { return empty() ? std::vector<int>{} : bbox_.upper(); }

StateSet StateSet::with(const State& x) const {
  auto v = states_;
  v.push_back(x);
  return StateSet(std::move(v));
}

StateSet StateSet::without(const State& x) const {
  auto v = states_;
  std::erase(v, x);
  return StateSet(std::move(v));
}

bool StateSet::is_subset_of(const StateSet& other) const {
  return std::all_of(states_.begin(), states_.end(), [&](const State& s) { return other.contains(s); });
}

}  // namespace poisbound
