#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "navqa/gridworld.hpp"

namespace navqa {

inline constexpr std::string_view kVocabularyVersion = "navqa-vocab-1";
inline constexpr int kPadId = 0;
inline constexpr int kMaxLanguageTokens = 24;

/// Answer classes in a fixed order: yes, no, 0..3, then the six colors.
inline constexpr int kNumAnswers = 6 + kNumColors;
inline constexpr int kAnswerYes = 0;
inline constexpr int kAnswerNo = 1;
inline constexpr int answer_for_count(int n) { return 2 + n; }
inline constexpr int answer_for_color(Color c) { return 6 + static_cast<int>(c); }

std::string_view answer_name(int answer);
std::optional<int> parse_answer(std::string_view s);

/// Dense token ids; id 0 is padding. The built-in list is the versioned
/// vocabulary every generated dataset uses.
class Vocabulary {
 public:
  static const Vocabulary& builtin();

  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  /// Throws UnknownToken.
  int id(std::string_view token) const;
  std::optional<int> find(std::string_view token) const;
  const std::string& token(int id) const;
  bool contains_id(int id) const { return id >= 0 && id < size(); }

  std::vector<int> encode(std::span<const std::string> words) const;
  std::vector<int> encode(std::initializer_list<std::string_view> words) const;
  std::string decode(std::span<const int> ids) const;

  /// Token id of each answer class in answer order.
  const std::vector<int>& answer_token_ids() const { return answer_ids_; }

  const std::vector<std::string>& tokens() const { return tokens_; }

  /// One token per line, line number = id.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  std::vector<int> answer_ids_;
};

/// Exactly kMaxLanguageTokens ids: leading kPadId padding, or the first
/// kMaxLanguageTokens tokens when longer.
std::vector<int> pad_language(std::span<const int> ids);

}  // namespace navqa
