#include "aif/corpus.hpp"

#include <algorithm>
#include <cctype>

#include "aif/errors.hpp"
#include "aif/io.hpp"
#include "aif/rng.hpp"

namespace aif {
namespace {

// Length in bytes of the UTF-8 sequence led by `first`, 0 if invalid.
int utf8_seq_len(unsigned char first) {
  if (first < 0x80) return 1;
  if ((first & 0xe0) == 0xc0) return 2;
  if ((first & 0xf0) == 0xe0) return 3;
  if ((first & 0xf8) == 0xf0) return 4;
  return 0;
}

bool is_continuation(unsigned char byte) { return (byte & 0xc0) == 0x80; }

const char* kSpecialTokens[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

bool is_whitespace_word(const std::string& word) {
  for (unsigned char c : word) {
    if (!std::isspace(c)) return false;
  }
  return !word.empty();
}

}  // namespace

std::vector<std::string> utf8_chars(const std::string& text) {
  std::vector<std::string> chars;
  std::size_t i = 0;
  while (i < text.size()) {
    const int len = utf8_seq_len(static_cast<unsigned char>(text[i]));
    if (len == 0 || i + len > text.size()) {
      throw SchemaError("invalid UTF-8 at byte " + std::to_string(i));
    }
    for (int k = 1; k < len; ++k) {
      if (!is_continuation(static_cast<unsigned char>(text[i + k]))) {
        throw SchemaError("invalid UTF-8 at byte " + std::to_string(i + k));
      }
    }
    chars.push_back(text.substr(i, len));
    i += len;
  }
  return chars;
}

std::size_t utf8_length(const std::string& text) { return utf8_chars(text).size(); }

Lexicon make_lexicon(const std::vector<std::string>& words) {
  Lexicon lex;
  for (const auto& w : words) {
    if (w.empty()) throw SchemaError("lexicon words must be non-empty");
    lex.max_word_len = std::max(lex.max_word_len, utf8_length(w));
    lex.words.insert(w);
  }
  return lex;
}

namespace {

std::vector<std::string> read_word_lines(const std::filesystem::path& path) {
  std::vector<std::string> words;
  for (const auto& line : split_lines(read_text_file(path))) {
    if (line.empty() || line[0] == '#') continue;
    words.push_back(line);
  }
  return words;
}

}  // namespace

Lexicon load_lexicon(const std::filesystem::path& path) {
  return make_lexicon(read_word_lines(path));
}

std::set<std::string> load_word_set(const std::filesystem::path& path) {
  const auto words = read_word_lines(path);
  return {words.begin(), words.end()};
}

std::vector<std::string> segment(const std::string& text, const Lexicon& lexicon) {
  const auto chars = utf8_chars(text);
  std::vector<std::string> words;
  std::size_t pos = 0;
  while (pos < chars.size()) {
    const std::size_t longest = std::min(lexicon.max_word_len, chars.size() - pos);
    std::string match;
    std::string prefix;
    for (std::size_t len = 1; len <= longest; ++len) {
      prefix += chars[pos + len - 1];
      if (lexicon.words.count(prefix)) match = prefix;
    }
    if (match.empty()) match = chars[pos];  // single-character fallback
    pos += utf8_length(match);
    words.push_back(std::move(match));
  }
  return words;
}

std::vector<std::string> split_sentences(const std::string& document) {
  static const std::string kSeparators[] = {"。", "！", "？", "\n"};
  std::vector<std::string> sentences;
  std::string current;
  for (const auto& ch : utf8_chars(document)) {
    bool is_sep = false;
    for (const auto& sep : kSeparators) {
      if (ch == sep) {
        is_sep = true;
        break;
      }
    }
    if (is_sep) {
      if (!current.empty()) sentences.push_back(std::move(current));
      current.clear();
    } else {
      current += ch;
    }
  }
  if (!current.empty()) sentences.push_back(std::move(current));
  return sentences;
}

std::vector<std::string> build_candidates(const std::vector<std::string>& corpus,
                                          const Lexicon& lexicon,
                                          const std::set<std::string>& stopwords,
                                          const std::set<std::string>& seeds) {
  if (corpus.empty()) throw SchemaError("empty corpus");
  std::set<std::string> unique;
  for (const auto& doc : corpus) {
    for (const auto& word : segment(doc, lexicon)) {
      if (is_whitespace_word(word)) continue;
      if (stopwords.count(word) || seeds.count(word)) continue;
      unique.insert(word);
    }
  }
  return {unique.begin(), unique.end()};
}

int Vocabulary::id_of(const std::string& token) const {
  const auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnk : it->second;
}

Vocabulary build_vocabulary(const std::vector<std::string>& corpus,
                            const Lexicon& lexicon) {
  std::set<std::string> chars;
  for (const auto& doc : corpus) {
    for (const auto& word : segment(doc, lexicon)) {
      if (is_whitespace_word(word)) continue;
      for (const auto& ch : utf8_chars(word)) chars.insert(ch);
    }
  }
  Vocabulary vocab;
  for (const char* tok : kSpecialTokens) vocab.id_to_token.emplace_back(tok);
  vocab.id_to_token.insert(vocab.id_to_token.end(), chars.begin(), chars.end());
  for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i) {
    vocab.token_to_id[vocab.id_to_token[i]] = static_cast<int>(i);
  }
  return vocab;
}

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::string out;
  for (const auto& token : vocab.id_to_token) {
    out += token;
    out += '\n';
  }
  write_file_atomic(path, out);
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  Vocabulary vocab;
  vocab.id_to_token = split_lines(read_text_file(path));
  if (vocab.id_to_token.size() < Vocabulary::kNumSpecial) {
    throw SchemaError("vocabulary too small: " + path.string());
  }
  for (int i = 0; i < Vocabulary::kNumSpecial; ++i) {
    if (vocab.id_to_token[i] != kSpecialTokens[i]) {
      throw SchemaError("vocabulary missing special token " +
                        std::string(kSpecialTokens[i]) + ": " + path.string());
    }
  }
  for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i) {
    if (!vocab.token_to_id.emplace(vocab.id_to_token[i], static_cast<int>(i)).second) {
      throw SchemaError("duplicate vocabulary token at line " + std::to_string(i + 1));
    }
  }
  return vocab;
}

namespace {

void append_special(TokenSequence& seq, int id, int segment) {
  const int pos = seq.length();
  seq.tokens.push_back(id);
  seq.segment_ids.push_back(segment);
  seq.word_spans.push_back({pos, pos + 1});
}

void append_word(TokenSequence& seq, const std::string& word, const Vocabulary& vocab,
                 int segment) {
  const int begin = seq.length();
  for (const auto& ch : utf8_chars(word)) {
    seq.tokens.push_back(vocab.id_of(ch));
    seq.segment_ids.push_back(segment);
  }
  seq.word_spans.push_back({begin, seq.length()});
}

int token_count(const std::vector<std::string>& words) {
  int n = 0;
  for (const auto& w : words) n += static_cast<int>(utf8_length(w));
  return n;
}

std::vector<std::string> drop_whitespace_words(const std::vector<std::string>& words) {
  std::vector<std::string> kept;
  for (const auto& w : words) {
    if (!is_whitespace_word(w)) kept.push_back(w);
  }
  return kept;
}

// Drops whole words from the tail of b, then a, until the encoded pair
// fits max_seq_len.
void truncate_pair(std::vector<std::string>& a, std::vector<std::string>& b,
                   int specials, int max_seq_len) {
  while (token_count(a) + token_count(b) + specials > max_seq_len) {
    if (!b.empty()) {
      b.pop_back();
    } else if (!a.empty()) {
      a.pop_back();
    } else {
      break;
    }
  }
}

}  // namespace

TokenSequence encode_single(const std::vector<std::string>& words_a,
                            const Vocabulary& vocab, int max_seq_len) {
  auto a = drop_whitespace_words(words_a);
  std::vector<std::string> empty;
  truncate_pair(a, empty, 2, max_seq_len);
  TokenSequence seq;
  append_special(seq, Vocabulary::kCls, 0);
  for (const auto& w : a) append_word(seq, w, vocab, 0);
  append_special(seq, Vocabulary::kSep, 0);
  return seq;
}

TokenSequence encode_pair(const std::vector<std::string>& words_a,
                          const std::vector<std::string>& words_b,
                          const Vocabulary& vocab, int max_seq_len) {
  auto a = drop_whitespace_words(words_a);
  auto b = drop_whitespace_words(words_b);
  truncate_pair(a, b, 3, max_seq_len);
  TokenSequence seq;
  append_special(seq, Vocabulary::kCls, 0);
  for (const auto& w : a) append_word(seq, w, vocab, 0);
  append_special(seq, Vocabulary::kSep, 0);
  for (const auto& w : b) append_word(seq, w, vocab, 1);
  append_special(seq, Vocabulary::kSep, 1);
  return seq;
}

namespace {

bool span_is_special(const TokenSequence& seq, const WordSpan& span,
                     const Vocabulary& vocab) {
  for (int t = span.begin; t < span.end; ++t) {
    if (vocab.is_special(seq.tokens[t])) return true;
  }
  return false;
}

std::vector<int> maskable_word_indices(const TokenSequence& seq, const Vocabulary& vocab) {
  std::vector<int> indices;
  for (std::size_t w = 0; w < seq.word_spans.size(); ++w) {
    if (!span_is_special(seq, seq.word_spans[w], vocab)) {
      indices.push_back(static_cast<int>(w));
    }
  }
  return indices;
}

// Draws a non-special token id; falls back to [MASK] in a vocabulary of
// specials only.
int random_regular_id(Rng& rng, const Vocabulary& vocab) {
  const int regular = vocab.size() - Vocabulary::kNumSpecial;
  if (regular <= 0) return Vocabulary::kMask;
  return Vocabulary::kNumSpecial + static_cast<int>(rng.below(regular));
}

MaskingPlan plan_wwm_with_rng(const TokenSequence& seq, double mask_rate, Rng& rng,
                              const Vocabulary& vocab) {
  auto words = maskable_word_indices(seq, vocab);
  int maskable_tokens = 0;
  for (int w : words) {
    maskable_tokens += seq.word_spans[w].end - seq.word_spans[w].begin;
  }
  const double target = mask_rate * maskable_tokens;

  rng.shuffle(words);
  std::vector<int> masked_positions;
  int covered = 0;
  for (std::size_t i = 0; i < words.size() && covered < target; ++i) {
    const auto& span = seq.word_spans[words[i]];
    for (int t = span.begin; t < span.end; ++t) masked_positions.push_back(t);
    covered += span.end - span.begin;
  }
  std::sort(masked_positions.begin(), masked_positions.end());

  MaskingPlan plan;
  for (int pos : masked_positions) {
    MaskedPosition mp;
    mp.position = pos;
    mp.label_id = seq.tokens[pos];
    const double u = rng.uniform();
    if (u < 0.8) {
      mp.replacement = Replacement::kMask;
      mp.input_id = Vocabulary::kMask;
    } else if (u < 0.9) {
      mp.replacement = Replacement::kRandom;
      mp.input_id = random_regular_id(rng, vocab);
    } else {
      mp.replacement = Replacement::kKeep;
      mp.input_id = seq.tokens[pos];
    }
    plan.positions.push_back(mp);
  }
  return plan;
}

}  // namespace

MaskingPlan plan_whole_word_mask(const TokenSequence& seq, double mask_rate,
                                 std::uint64_t rng_seed, const Vocabulary& vocab) {
  if (mask_rate < 0.0 || mask_rate > 1.0) {
    throw SchemaError("mask_rate must lie in [0, 1]");
  }
  Rng rng(rng_seed);
  return plan_wwm_with_rng(seq, mask_rate, rng, vocab);
}

namespace {

struct SentenceRef {
  int doc = 0;
  int index = 0;  // position within the document
};

// Words of every sentence, segmented once up front.
struct SentencePool {
  std::vector<std::vector<std::vector<std::string>>> docs;  // doc -> sentence -> words
  std::vector<SentenceRef> all;        // every sentence
  std::vector<SentenceRef> with_next;  // sentences having a successor
};

SentencePool build_pool(const std::vector<std::string>& corpus, const Lexicon& lexicon) {
  SentencePool pool;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    std::vector<std::vector<std::string>> sentences;
    for (const auto& sentence : split_sentences(corpus[d])) {
      auto words = drop_whitespace_words(segment(sentence, lexicon));
      if (!words.empty()) sentences.push_back(std::move(words));
    }
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      pool.all.push_back({static_cast<int>(d), static_cast<int>(s)});
      if (s + 1 < sentences.size()) {
        pool.with_next.push_back({static_cast<int>(d), static_cast<int>(s)});
      }
    }
    pool.docs.push_back(std::move(sentences));
  }
  return pool;
}

std::optional<SpanTarget> sample_span(const TokenSequence& seq,
                                      const std::vector<bool>& word_masked,
                                      const Vocabulary& vocab, Rng& rng) {
  const int num_words = static_cast<int>(seq.word_spans.size());
  const int want = 2 + static_cast<int>(rng.below(2));  // 2 or 3 whole words
  for (int length : {want, want == 2 ? 3 : 2}) {
    std::vector<int> starts;
    for (int w = 0; w + length <= num_words; ++w) {
      bool ok = true;
      for (int k = 0; k < length; ++k) {
        if (word_masked[w + k] || span_is_special(seq, seq.word_spans[w + k], vocab)) {
          ok = false;
          break;
        }
      }
      if (ok) starts.push_back(w);
    }
    if (starts.empty()) continue;
    const int w0 = starts[rng.below(starts.size())];
    return SpanTarget{seq.word_spans[w0].begin, seq.word_spans[w0 + length - 1].end};
  }
  return std::nullopt;
}

}  // namespace

std::vector<PretrainExample> make_pretrain_batch(const std::vector<std::string>& corpus,
                                                 const Lexicon& lexicon,
                                                 const Vocabulary& vocab,
                                                 int batch_size, double mask_rate,
                                                 int max_seq_len,
                                                 std::uint64_t rng_seed) {
  const SentencePool pool = build_pool(corpus, lexicon);
  if (corpus.size() < 2 || pool.all.size() < 2 || pool.with_next.empty()) {
    throw SchemaError("corpus too small: need >= 2 documents and >= 2 sentences");
  }

  Rng rng(rng_seed);
  std::vector<PretrainExample> batch;
  for (int b = 0; b < batch_size; ++b) {
    const SentenceRef a = pool.with_next[rng.below(pool.with_next.size())];
    const SentenceRef successor{a.doc, a.index + 1};

    PretrainExample ex;
    ex.is_next = rng.uniform() < 0.5;
    SentenceRef bref = successor;
    if (!ex.is_next) {
      do {
        bref = pool.all[rng.below(pool.all.size())];
      } while (bref.doc == successor.doc && bref.index == successor.index);
    }

    ex.seq = encode_pair(pool.docs[a.doc][a.index], pool.docs[bref.doc][bref.index],
                         vocab, max_seq_len);
    ex.masking = plan_wwm_with_rng(ex.seq, mask_rate, rng, vocab);

    std::vector<bool> word_masked(ex.seq.word_spans.size(), false);
    for (const auto& mp : ex.masking.positions) {
      for (std::size_t w = 0; w < ex.seq.word_spans.size(); ++w) {
        if (mp.position >= ex.seq.word_spans[w].begin &&
            mp.position < ex.seq.word_spans[w].end) {
          word_masked[w] = true;
        }
      }
    }
    ex.span = sample_span(ex.seq, word_masked, vocab, rng);

    ex.input_ids = ex.seq.tokens;
    for (const auto& mp : ex.masking.positions) ex.input_ids[mp.position] = mp.input_id;
    if (ex.span) {
      // Span tokens are hidden from the model and join the MLM targets.
      for (int t = ex.span->begin; t < ex.span->end; ++t) {
        ex.input_ids[t] = Vocabulary::kMask;
        MaskedPosition mp;
        mp.position = t;
        mp.replacement = Replacement::kMask;
        mp.input_id = Vocabulary::kMask;
        mp.label_id = ex.seq.tokens[t];
        ex.masking.positions.push_back(mp);
      }
      std::sort(ex.masking.positions.begin(), ex.masking.positions.end(),
                [](const MaskedPosition& x, const MaskedPosition& y) {
                  return x.position < y.position;
                });
    }
    batch.push_back(std::move(ex));
  }
  return batch;
}

std::vector<FineTuneExample> load_finetune_tsv(const std::filesystem::path& path) {
  std::vector<FineTuneExample> examples;
  const auto lines = split_lines(read_text_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.empty() || line[0] == '#') continue;
    const auto context = path.string() + " line " + std::to_string(i + 1);
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? std::string::npos
                                                   : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw SchemaError(context + ": expected 3 tab-separated columns");
    }
    FineTuneExample ex;
    const std::string tag = line.substr(0, t1);
    if (tag != "0" && tag != "1") {
      throw SchemaError(context + ": tag must be 0 or 1, got '" + tag + "'");
    }
    ex.tag = tag == "1" ? 1 : 0;
    ex.word = line.substr(t1 + 1, t2 - t1 - 1);
    ex.text = line.substr(t2 + 1);
    if (ex.word.empty()) throw SchemaError(context + ": empty word");
    if (ex.text.empty()) throw SchemaError(context + ": empty text");
    examples.push_back(std::move(ex));
  }
  return examples;
}

}  // namespace aif
