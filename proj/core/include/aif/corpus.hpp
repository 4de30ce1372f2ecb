#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace aif {

class Rng;

// Splits UTF-8 text into code points. Throws SchemaError on malformed bytes.
std::vector<std::string> utf8_chars(const std::string& text);

// Character count of a UTF-8 string.
std::size_t utf8_length(const std::string& text);

struct Lexicon {
  std::set<std::string> words;
  std::size_t max_word_len = 0;  // characters, not bytes
};

Lexicon make_lexicon(const std::vector<std::string>& words);

// One word per line, '#' starts a comment line, blank lines ignored.
Lexicon load_lexicon(const std::filesystem::path& path);
std::set<std::string> load_word_set(const std::filesystem::path& path);

// Forward maximum matching with single-character fallback.
// Concatenating the result reproduces `text` exactly.
std::vector<std::string> segment(const std::string& text, const Lexicon& lexicon);

// Sentence boundaries: 。 ！ ？ and newline. Separators are consumed;
// empty sentences are dropped.
std::vector<std::string> split_sentences(const std::string& document);

// Unique segmented words minus stopwords and seeds, sorted.
// Whitespace-only words never become candidates.
std::vector<std::string> build_candidates(const std::vector<std::string>& corpus,
                                          const Lexicon& lexicon,
                                          const std::set<std::string>& stopwords,
                                          const std::set<std::string>& seeds);

// Token inventory: special ids first, then corpus characters in sorted order.
struct Vocabulary {
  std::vector<std::string> id_to_token;
  std::map<std::string, int> token_to_id;

  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecial = 5;

  int size() const { return static_cast<int>(id_to_token.size()); }
  int id_of(const std::string& token) const;
  bool is_special(int id) const { return id < kNumSpecial; }
};

Vocabulary build_vocabulary(const std::vector<std::string>& corpus,
                            const Lexicon& lexicon);
void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocabulary(const std::filesystem::path& path);

// Half-open token-index range grouping the tokens of one word.
struct WordSpan {
  int begin = 0;
  int end = 0;
};

struct TokenSequence {
  std::vector<int> tokens;
  std::vector<WordSpan> word_spans;  // partitions [0, tokens.size())
  std::vector<int> segment_ids;      // 0 or 1, constant within a segment

  int length() const { return static_cast<int>(tokens.size()); }
};

// "[CLS] a [SEP]" with segment 0 throughout. Words become per-character
// tokens; each word is one span, [CLS]/[SEP] are singleton spans.
TokenSequence encode_single(const std::vector<std::string>& words_a,
                            const Vocabulary& vocab, int max_seq_len);

// "[CLS] a [SEP] b [SEP]" with segments 0/1. Overlong inputs lose whole
// words from the tail of b first, then a.
TokenSequence encode_pair(const std::vector<std::string>& words_a,
                          const std::vector<std::string>& words_b,
                          const Vocabulary& vocab, int max_seq_len);

enum class Replacement { kMask, kRandom, kKeep };

struct MaskedPosition {
  int position = 0;
  Replacement replacement = Replacement::kMask;
  int input_id = 0;  // id substituted into the model input
  int label_id = 0;  // original id, the MLM target
};

// Positions ascend; whole words are covered atomically; special tokens
// are never included.
struct MaskingPlan {
  std::vector<MaskedPosition> positions;
};

// Samples whole words until at least mask_rate of maskable tokens are
// covered, then draws 80% MASK / 10% RANDOM / 10% KEEP per position.
MaskingPlan plan_whole_word_mask(const TokenSequence& seq, double mask_rate,
                                 std::uint64_t rng_seed, const Vocabulary& vocab);

// In-span token range for the span prediction task. Half-open.
struct SpanTarget {
  int begin = 0;
  int end = 0;
};

struct PretrainExample {
  TokenSequence seq;  // original ids, starts with [CLS]
  MaskingPlan masking;
  bool is_next = false;
  std::optional<SpanTarget> span;
  std::vector<int> input_ids;  // tokens after masking and span cover
};

// Sentence-pair examples with NSP labels, whole-word masking and one
// span target (2-3 whole words, masked in the input, disjoint from the
// WWM words). Pure function of (inputs, rng_seed).
std::vector<PretrainExample> make_pretrain_batch(const std::vector<std::string>& corpus,
                                                 const Lexicon& lexicon,
                                                 const Vocabulary& vocab,
                                                 int batch_size, double mask_rate,
                                                 int max_seq_len,
                                                 std::uint64_t rng_seed);

struct FineTuneExample {
  int tag = 0;  // 1 iff word is a declared keyword of text
  std::string word;
  std::string text;
};

// TSV columns: tag, word, text. '#' comment lines allowed.
std::vector<FineTuneExample> load_finetune_tsv(const std::filesystem::path& path);

}  // namespace aif
