#include "navqa/vocabulary.hpp"

#include <algorithm>

#include <fstream>

#include "navqa/error.hpp"

namespace navqa {

namespace {

constexpr std::array<std::string_view, 6> kFixedAnswers = {"yes", "no", "0", "1", "2", "3"};
constexpr int kMaxCountWord = 40;

std::vector<std::string> builtin_tokens() {
  std::vector<std::string> t = {"<pad>"};
  for (auto a : kFixedAnswers) t.emplace_back(a);
  for (int c = 0; c < kNumColors; ++c) t.emplace_back(to_string(static_cast<Color>(c)));
  for (int o = 0; o < kNumObjectTypes; ++o) t.emplace_back(to_string(static_cast<ObjectType>(o)));
  for (std::string_view w : {"is", "there", "a", "in", "how", "many", "what", "color", "the",
                             "walk", "past", "turn", "left", "right", "around", "go", "forward",
                             "to", "and"})
    t.emplace_back(w);
  for (int n = 4; n <= kMaxCountWord; ++n) t.push_back(std::to_string(n));
  return t;
}

}  // namespace

std::string_view answer_name(int answer) {
  require(answer >= 0 && answer < kNumAnswers, ErrorCode::UnknownToken,
          "answer index " + std::to_string(answer));
  if (answer < 6) return kFixedAnswers[answer];
  return to_string(static_cast<Color>(answer - 6));
}

std::optional<int> parse_answer(std::string_view s) {
  for (int i = 0; i < kNumAnswers; ++i)
    if (answer_name(i) == s) return i;
  return std::nullopt;
}

const Vocabulary& Vocabulary::builtin() {
  static const Vocabulary vocab(builtin_tokens());
  return vocab;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  require(!tokens_.empty() && tokens_[0] == "<pad>", ErrorCode::FormatError,
          "vocabulary must start with <pad>");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    require(ids_.emplace(tokens_[i], static_cast<int>(i)).second, ErrorCode::FormatError,
            "duplicate token '" + tokens_[i] + "'");
  }
  for (int a = 0; a < kNumAnswers; ++a) answer_ids_.push_back(id(answer_name(a)));
}

int Vocabulary::id(std::string_view token) const {
  auto found = find(token);
  if (!found) fail(ErrorCode::UnknownToken, "'" + std::string(token) + "'");
  return *found;
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  require(contains_id(id), ErrorCode::UnknownToken, "token id " + std::to_string(id));
  return tokens_[id];
}

std::vector<int> Vocabulary::encode(std::span<const std::string> words) const {
  std::vector<int> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

std::vector<int> Vocabulary::encode(std::initializer_list<std::string_view> words) const {
  std::vector<int> out;
  out.reserve(words.size());
  for (auto w : words) out.push_back(id(w));
  return out;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  for (int i : ids) {
    if (i == kPadId) continue;
    if (!out.empty()) out += ' ';
    out += token(i);
  }
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::FormatError, "cannot write " + path.string());
  for (const auto& t : tokens_) f << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  require(static_cast<bool>(f), ErrorCode::FormatError, "cannot read " + path.string());
  std::vector<std::string> tokens;
  for (std::string line; std::getline(f, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

std::vector<int> pad_language(std::span<const int> ids) {
  std::vector<int> out(kMaxLanguageTokens, kPadId);
  const std::size_t n = std::min<std::size_t>(ids.size(), out.size());
  std::copy(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), out.end() - static_cast<std::ptrdiff_t>(n));
  return out;
}

}  // namespace navqa
