// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#include "flowsr/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <numbers>

#include "flowsr/common.hpp"
#include "flowsr/dsp.hpp"
#include "flowsr/wav.hpp"

namespace flowsr::datagen {

namespace {

constexpr double kPi = std::numbers::pi;

double db_to_lin(double db) { return std::pow(10.0, db / 20.0); }

double peak_abs(const std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  return p;
}

double rms(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / std::max<size_t>(1, x.size()));
}

// ---------------------------------------------------------------------------
// filters
// ---------------------------------------------------------------------------

struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

  void apply(std::vector<double>& x) const {
    double z1 = 0.0, z2 = 0.0;
    for (auto& v : x) {
      const double in = v;
      const double out = b0 * in + z1;
      z1 = b1 * in - a1 * out + z2;
      z2 = b2 * in - a2 * out;
      v = out;
    }
  }

  // phase at normalized angular frequency w
  double phase(double w) const {
    const std::complex<double> ejw = std::polar(1.0, -w);
    const std::complex<double> num = b0 + (b1 + b2 * ejw) * ejw;
    const std::complex<double> den = 1.0 + (a1 + a2 * ejw) * ejw;
    return std::arg(num / den);
  }

  double group_delay(double w) const {
    const double h = 1e-4;
    double dp = phase(w + h) - phase(w - h);
    while (dp > kPi) dp -= 2 * kPi;
    while (dp < -kPi) dp += 2 * kPi;
    return -dp / (2 * h);
  }
};

Biquad rbj_lowpass(double fc, double fs, double q) {
  const double w0 = 2.0 * kPi * fc / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double cw = std::cos(w0);
  const double a0 = 1.0 + alpha;
  Biquad b;
  b.b0 = (1.0 - cw) / 2.0 / a0;
  b.b1 = (1.0 - cw) / a0;
  b.b2 = b.b0;
  b.a1 = -2.0 * cw / a0;
  b.a2 = (1.0 - alpha) / a0;
  return b;
}

Biquad rbj_highpass(double fc, double fs, double q) {
  const double w0 = 2.0 * kPi * fc / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double cw = std::cos(w0);
  const double a0 = 1.0 + alpha;
  Biquad b;
  b.b0 = (1.0 + cw) / 2.0 / a0;
  b.b1 = -(1.0 + cw) / a0;
  b.b2 = b.b0;
  b.a1 = -2.0 * cw / a0;
  b.a2 = (1.0 - alpha) / a0;
  return b;
}

Biquad rbj_notch(double fc, double fs, double q) {
  const double w0 = 2.0 * kPi * fc / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double cw = std::cos(w0);
  const double a0 = 1.0 + alpha;
  Biquad b;
  b.b0 = 1.0 / a0;
  b.b1 = -2.0 * cw / a0;
  b.b2 = 1.0 / a0;
  b.a1 = -2.0 * cw / a0;
  b.a2 = (1.0 - alpha) / a0;
  return b;
}

// cascaded biquads with integer group-delay compensation at wref
void apply_iir_compensated(std::vector<double>& x,
                           const std::vector<Biquad>& cascade, double wref) {
  double delay = 0.0;
  for (const auto& b : cascade) {
    b.apply(x);
    delay += b.group_delay(wref);
  }
  const int shift = std::max(0, static_cast<int>(std::lround(delay)));
  if (shift > 0 && shift < static_cast<int>(x.size())) {
    x.erase(x.begin(), x.begin() + shift);
    x.insert(x.end(), static_cast<size_t>(shift), 0.0);
  }
}

// linear-phase windowed-sinc FIR, exactly delay-compensated
std::vector<double> fir_filter(const std::vector<double>& x, double cutoff,
                               int fs, bool highpass, int taps = 321) {
  const double fc = cutoff / fs;
  const int half = taps / 2;
  std::vector<double> h(static_cast<size_t>(taps));
  double sum = 0.0;
  for (int i = 0; i < taps; ++i) {
    const int m = i - half;
    double v = m == 0 ? 2.0 * fc
                      : std::sin(2.0 * kPi * fc * m) / (kPi * m);
    const double wb = 0.42 - 0.5 * std::cos(2.0 * kPi * i / (taps - 1)) +
                      0.08 * std::cos(4.0 * kPi * i / (taps - 1));
    v *= wb;
    h[static_cast<size_t>(i)] = v;
    sum += v;
  }
  for (auto& v : h) v /= sum;  // unit DC gain
  if (highpass) {
    for (auto& v : h) v = -v;
    h[static_cast<size_t>(half)] += 1.0;  // spectral inversion
  }

  std::vector<double> y(x.size(), 0.0);
  const long long n = static_cast<long long>(x.size());
  for (long long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int t = 0; t < taps; ++t) {
      const long long src = i + half - t;
      if (src >= 0 && src < n)
        acc += h[static_cast<size_t>(t)] * x[static_cast<size_t>(src)];
    }
    y[static_cast<size_t>(i)] = acc;
  }
  return y;
}

void apply_bandlimit(std::vector<double>& x, double cutoff, int fs,
                     bool highpass, FilterKind kind) {
  switch (kind) {
    case FilterKind::fir:
      x = fir_filter(x, cutoff, fs, highpass);
      return;
    case FilterKind::butterworth: {
      // 4th-order Butterworth as two biquads
      std::vector<Biquad> cascade;
      for (double q : {0.54119610, 1.30656296}) {
        cascade.push_back(highpass ? rbj_highpass(cutoff, fs, q)
                                   : rbj_lowpass(cutoff, fs, q));
      }
      const double wref = highpass
                              ? 2.0 * kPi * std::min(2.0 * cutoff, 0.45 * fs) / fs
                              : 1e-3;
      apply_iir_compensated(x, cascade, wref);
      return;
    }
    case FilterKind::notch_cascade: {
      // steeper initial rolloff: Butterworth plus notches above the edge
      std::vector<Biquad> cascade;
      for (double q : {0.54119610, 1.30656296})
        cascade.push_back(highpass ? rbj_highpass(cutoff, fs, q)
                                   : rbj_lowpass(cutoff, fs, q));
      const double n1 = highpass ? cutoff / 1.2 : cutoff * 1.2;
      const double n2 = highpass ? cutoff / 1.45 : cutoff * 1.45;
      for (double fn : {n1, n2})
        if (fn > 20.0 && fn < 0.48 * fs)
          cascade.push_back(rbj_notch(fn, fs, 6.0));
      const double wref = highpass
                              ? 2.0 * kPi * std::min(2.0 * cutoff, 0.45 * fs) / fs
                              : 1e-3;
      apply_iir_compensated(x, cascade, wref);
      return;
    }
  }
}

// Paul Kellet's economy pink noise filter
double pink_step(double white, double* state) {
  state[0] = 0.99886 * state[0] + white * 0.0555179;
  state[1] = 0.99332 * state[1] + white * 0.0750759;
  state[2] = 0.96900 * state[2] + white * 0.1538520;
  state[3] = 0.86650 * state[3] + white * 0.3104856;
  state[4] = 0.55000 * state[4] + white * 0.5329522;
  state[5] = -0.7616 * state[5] - white * 0.0168980;
  const double out = state[0] + state[1] + state[2] + state[3] + state[4] +
                     state[5] + state[6] + white * 0.5362;
  state[6] = white * 0.115926;
  return out * 0.11;
}

}  // namespace

// ---------------------------------------------------------------------------
// spec plumbing
// ---------------------------------------------------------------------------

std::string to_string(FilterKind k) {
  switch (k) {
    case FilterKind::fir: return "fir";
    case FilterKind::butterworth: return "butterworth";
    case FilterKind::notch_cascade: return "notch-cascade";
  }
  return "?";
}

FilterKind filter_kind_from_string(const std::string& s) {
  if (s == "fir") return FilterKind::fir;
  if (s == "butterworth") return FilterKind::butterworth;
  if (s == "notch-cascade") return FilterKind::notch_cascade;
  throw Error(format_msg("unknown filter kind '", s, "'"));
}

std::string to_string(NonlinKind k) {
  switch (k) {
    case NonlinKind::sigmoid: return "sigmoid";
    case NonlinKind::rectify: return "rectify";
    case NonlinKind::hard_clip: return "hard-clip";
  }
  return "?";
}

NonlinKind nonlin_kind_from_string(const std::string& s) {
  if (s == "sigmoid") return NonlinKind::sigmoid;
  if (s == "rectify") return NonlinKind::rectify;
  if (s == "hard-clip") return NonlinKind::hard_clip;
  throw Error(format_msg("unknown nonlinearity '", s, "'"));
}

void DegradationSpec::validate(int sample_rate) const {
  const double nyq = sample_rate / 2.0;
  require(!lowpass || (lowpass_hz.lo >= 1000.0 && lowpass_hz.hi <= nyq),
          "DegradationSpec: lowpass cutoff range [", lowpass_hz.lo, ", ",
          lowpass_hz.hi, "] must sit in [1000, ", nyq, "]");
  require(!highpass || (highpass_hz.lo >= 20.0 && highpass_hz.hi <= 1000.0),
          "DegradationSpec: highpass cutoff out of range");
  require(!notch || (notch_hz.hi < nyq && notch_q.lo > 0),
          "DegradationSpec: bad notch parameters");
  require(!dropouts ||
              (dropout_ms.lo >= 10.0 && dropout_ms.hi <= 80.0 &&
               dropout_count >= 0),
          "DegradationSpec: dropout lengths must stay within [10, 80] ms");
  require(!modulation || (am_depth.lo >= 0.0 && am_depth.hi <= 1.0),
          "DegradationSpec: AM depth must be in [0, 1]");
  require(!nonlinear || drive.lo >= 1.0,
          "DegradationSpec: nonlinearity drive must be >= 1");
  require(!bubbles || bubble_count >= 0,
          "DegradationSpec: bubble count must be non-negative");
}

bool DegradationSpec::any_enabled() const {
  return reverb || noise || level || highpass || lowpass || notch ||
         nonlinear || bubbles || dropouts || modulation;
}

std::string DegradationSpec::parameter_summary() const {
  std::ostringstream os;
  auto range = [&os](const char* name, const Range& r) {
    os << name << "=[" << r.lo << " " << r.hi << "];";
  };
  if (reverb) range("rt60_s", rt60_s);
  if (noise) os << "snr_db=N(" << snr_mean_db << " " << snr_std_db << ");";
  if (level)
    os << "level_dbfs=N(" << level_mean_dbfs << " " << level_std_dbfs << ");";
  if (highpass) range("highpass_hz", highpass_hz);
  if (lowpass) {
    range("lowpass_hz", lowpass_hz);
    os << "filter=" << to_string(filter_kind) << ";";
  }
  if (notch) {
    range("notch_hz", notch_hz);
    range("notch_q", notch_q);
  }
  if (nonlinear) {
    os << "nonlin=" << to_string(nonlin_kind) << ";";
    range("drive", drive);
    range("clip_level", clip_level);
  }
  if (bubbles) {
    os << "bubble_count=" << bubble_count << ";";
    range("bubble_size", bubble_size);
    range("bubble_depth", bubble_depth);
  }
  if (dropouts) {
    range("dropout_ms", dropout_ms);
    os << "dropout_count=" << dropout_count << ";";
  }
  if (modulation) {
    range("am_rate_hz", am_rate_hz);
    range("am_depth", am_depth);
  }
  return os.str();
}

std::string DegradationSpec::stage_list() const {
  std::string s;
  auto add = [&s](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ";";
    s += name;
  };
  add(reverb, "reverb");
  add(noise, "noise");
  add(level, "level");
  add(highpass, "highpass");
  add(lowpass, "lowpass");
  add(notch, "notch");
  add(nonlinear, "nonlinear");
  add(bubbles, "bubbles");
  add(dropouts, "dropouts");
  add(modulation, "modulation");
  return s;
}

// ---------------------------------------------------------------------------
// clean synthesis
// ---------------------------------------------------------------------------

std::vector<double> synth_clean(Rng& rng, double duration_s,
                                int sample_rate) {
  require(duration_s >= 1.0 && duration_s <= 10.0,
          "synth_clean: duration must be in [1, 10] s, got ", duration_s);
  const int n = static_cast<int>(duration_s * sample_rate);
  std::vector<double> x(static_cast<size_t>(n), 0.0);

  const double f0_base = rng.uniform(110.0, 220.0);
  const double vib_rate = rng.uniform(4.0, 7.0);
  const double vib_depth = rng.uniform(0.01, 0.04);
  const double vib_phase = rng.uniform(0.0, 2.0 * kPi);
  const double drift_rate = rng.uniform(0.2, 0.5);
  const double drift_depth = rng.uniform(0.05, 0.12);
  const double drift_phase = rng.uniform(0.0, 2.0 * kPi);

  struct Formant {
    double freq, bw, amp;
  };
  const Formant formants[3] = {
      {rng.uniform(300.0, 900.0), rng.uniform(60.0, 150.0), 1.0},
      {rng.uniform(1000.0, 2400.0), rng.uniform(80.0, 200.0), 0.5},
      {rng.uniform(2500.0, 3400.0), rng.uniform(100.0, 250.0), 0.25}};
  auto formant_gain = [&formants](double f) {
    double g = 0.05;  // spectral floor keeps upper harmonics alive
    for (const auto& fm : formants) {
      const double d = f - fm.freq;
      g += fm.amp * fm.bw * fm.bw / (d * d + fm.bw * fm.bw);
    }
    return g;
  };

  const double fmax_target = 0.475 * sample_rate;
  int pos = 0;
  double phase = rng.uniform(0.0, 2.0 * kPi);
  while (pos < n) {
    const int syl_len =
        static_cast<int>(rng.uniform(0.12, 0.30) * sample_rate);
    const int gap_len =
        static_cast<int>(rng.uniform(0.03, 0.12) * sample_rate);
    const bool voiced = rng.uniform() < 0.75;
    const double amp = rng.uniform(0.5, 1.0);
    const int ramp = sample_rate * 15 / 1000;

    if (voiced) {
      const int harmonics = std::max(
          3, static_cast<int>(fmax_target / (f0_base * (1 + drift_depth))));
      std::vector<double> hamp(static_cast<size_t>(harmonics));
      for (int h = 1; h <= harmonics; ++h)
        hamp[static_cast<size_t>(h - 1)] =
            formant_gain(h * f0_base) / static_cast<double>(h);
      for (int i = 0; i < syl_len && pos + i < n; ++i) {
        const double t = static_cast<double>(pos + i) / sample_rate;
        const double f0 =
            f0_base *
            (1.0 + vib_depth * std::sin(2.0 * kPi * vib_rate * t + vib_phase)) *
            (1.0 +
             drift_depth * std::sin(2.0 * kPi * drift_rate * t + drift_phase));
        phase += 2.0 * kPi * f0 / sample_rate;
        double env = 1.0;
        if (i < ramp) env = 0.5 - 0.5 * std::cos(kPi * i / ramp);
        if (i > syl_len - ramp)
          env = 0.5 - 0.5 * std::cos(kPi * (syl_len - i) / ramp);
        double s = 0.0;
        for (int h = 1; h <= harmonics; ++h) {
          const double hp = phase * h;
          if (h * f0 > fmax_target) break;
          s += hamp[static_cast<size_t>(h - 1)] * std::sin(hp);
        }
        s += 0.02 * rng.normal();  // breath
        x[static_cast<size_t>(pos + i)] = amp * env * s;
      }
    } else {
      // fricative burst: high-tilted noise
      double prev = 0.0;
      for (int i = 0; i < syl_len && pos + i < n; ++i) {
        double env = 1.0;
        if (i < ramp) env = 0.5 - 0.5 * std::cos(kPi * i / ramp);
        if (i > syl_len - ramp)
          env = 0.5 - 0.5 * std::cos(kPi * (syl_len - i) / ramp);
        const double w = rng.normal();
        const double hp = w - 0.7 * prev;
        prev = w;
        x[static_cast<size_t>(pos + i)] = amp * env * 0.35 * hp;
      }
    }
    pos += syl_len + gap_len;
  }

  // low noise floor so only deliberate dropouts are exactly zero
  const double pk = peak_abs(x);
  const double floor_amp = std::max(pk, 1e-3) * db_to_lin(-45.0);
  for (auto& v : x) v += floor_amp * rng.normal();

  // peak-normalize to -25 dBFS
  const double target = db_to_lin(-25.0);
  const double scale = target / peak_abs(x);
  for (auto& v : x) v *= scale;
  return x;
}

// ---------------------------------------------------------------------------
// degradation cascade
// ---------------------------------------------------------------------------

std::vector<double> apply_degradation(const std::vector<double>& clean,
                                      const DegradationSpec& spec,
                                      int sample_rate, const Rng& rng) {
  spec.validate(sample_rate);
  std::vector<double> y = clean;
  const int n = static_cast<int>(y.size());

  if (spec.reverb) {
    Rng r = rng.fork(1);
    const double rt60 = spec.rt60_s.sample(r);
    const double tau = rt60 / 6.91;
    const int ir_len = std::min(n, static_cast<int>(0.5 * rt60 * sample_rate));
    std::vector<double> ir(static_cast<size_t>(ir_len), 0.0);
    ir[0] = 1.0;
    for (int i = 1; i < ir_len; ++i)
      ir[static_cast<size_t>(i)] =
          0.25 * r.normal() * std::exp(-i / (tau * sample_rate));
    std::vector<double> out(y.size(), 0.0);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      const int lim = std::min(i + 1, ir_len);
      for (int j = 0; j < lim; ++j)
        acc += ir[static_cast<size_t>(j)] * y[static_cast<size_t>(i - j)];
      out[static_cast<size_t>(i)] = acc;
    }
    y = std::move(out);
  }

  if (spec.noise) {
    Rng r = rng.fork(2);
    const double snr_db = r.normal(spec.snr_mean_db, spec.snr_std_db);
    const double sig_rms = rms(y);
    const double noise_rms = sig_rms * db_to_lin(-snr_db);
    const bool pink = r.uniform() < 0.5;
    double state[7] = {0, 0, 0, 0, 0, 0, 0};
    std::vector<double> noise(y.size());
    for (auto& v : noise) {
      const double w = r.normal();
      v = pink ? pink_step(w, state) : w;
    }
    const double cur = rms(noise);
    const double g = cur > 0 ? noise_rms / cur : 0.0;
    for (size_t i = 0; i < y.size(); ++i) y[i] += g * noise[i];
  }

  if (spec.level) {
    Rng r = rng.fork(3);
    const double target_db = r.normal(spec.level_mean_dbfs, spec.level_std_dbfs);
    const double cur = rms(y);
    if (cur > 0) {
      const double g = db_to_lin(target_db) / cur;
      for (auto& v : y) v *= g;
    }
  }

  if (spec.highpass) {
    Rng r = rng.fork(4);
    apply_bandlimit(y, spec.highpass_hz.sample(r), sample_rate, true,
                    spec.filter_kind);
  }
  if (spec.lowpass) {
    Rng r = rng.fork(5);
    apply_bandlimit(y, spec.lowpass_hz.sample(r), sample_rate, false,
                    spec.filter_kind);
  }
  if (spec.notch) {
    Rng r = rng.fork(6);
    rbj_notch(spec.notch_hz.sample(r), sample_rate, spec.notch_q.sample(r))
        .apply(y);
  }

  if (spec.nonlinear) {
    Rng r = rng.fork(7);
    switch (spec.nonlin_kind) {
      case NonlinKind::sigmoid: {
        const double g = spec.drive.sample(r);
        const double norm = 2.0 / g;  // unit small-signal gain
        for (auto& v : y)
          v = norm * (2.0 / (1.0 + std::exp(-g * v)) - 1.0);
        break;
      }
      case NonlinKind::rectify: {
        const double mix = std::min(1.0, spec.drive.sample(r) / 10.0);
        for (auto& v : y) v = (1.0 - mix) * v + mix * std::abs(v);
        break;
      }
      case NonlinKind::hard_clip: {
        const double level = spec.clip_level.sample(r) * peak_abs(y);
        for (auto& v : y) v = std::clamp(v, -level, level);
        break;
      }
    }
  }

  if (spec.bubbles && spec.bubble_count > 0) {
    Rng r = rng.fork(8);
    dsp::StftConfig scfg;
    scfg.sample_rate = sample_rate;
    auto spec_y = dsp::stft(y, scfg);
    for (int b = 0; b < spec.bubble_count; ++b) {
      const double k0 = r.uniform(0.1, 0.9) * spec_y.bins;
      const double n0 = r.uniform(0.05, 0.95) * spec_y.frames;
      const double sk = spec.bubble_size.sample(r);
      const double sn = spec.bubble_size.sample(r);
      const double depth = spec.bubble_depth.sample(r);
      for (int k = 0; k < spec_y.bins; ++k)
        for (int f = 0; f < spec_y.frames; ++f) {
          const double dk = (k - k0) / sk;
          const double dn = (f - n0) / sn;
          const double g = 1.0 - depth * std::exp(-0.5 * (dk * dk + dn * dn));
          spec_y.at(k, f) *= g;
        }
    }
    auto out = dsp::istft(spec_y, scfg);
    out.resize(y.size());
    y = std::move(out);
  }

  if (spec.dropouts && spec.dropout_count > 0) {
    Rng r = rng.fork(9);
    const int seg = n / spec.dropout_count;
    for (int d = 0; d < spec.dropout_count; ++d) {
      const int len = static_cast<int>(spec.dropout_ms.sample(r) / 1000.0 *
                                       sample_rate);
      const int margin = sample_rate / 100;  // keep spans separated
      const int lo = d * seg + margin;
      const int hi = std::max(lo + 1, (d + 1) * seg - len - margin);
      const int start =
          lo + static_cast<int>(r.below(static_cast<uint64_t>(hi - lo)));
      for (int i = start; i < std::min(n, start + len); ++i)
        y[static_cast<size_t>(i)] = 0.0;
    }
  }

  if (spec.modulation) {
    Rng r = rng.fork(10);
    const double rate = spec.am_rate_hz.sample(r);
    const double depth = spec.am_depth.sample(r);
    const double phase = r.uniform(0.0, 2.0 * kPi);
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      const double gain =
          1.0 - depth * (0.5 - 0.5 * std::cos(2.0 * kPi * rate * t + phase));
      y[static_cast<size_t>(i)] *= gain;
    }
  }

  // never hand the flow a signal outside the valid range
  const double pk = peak_abs(y);
  if (pk > 1.0) {
    const double g = 0.99 / pk;
    for (auto& v : y) v *= g;
  }
  return y;
}

Pair make_pair(const Rng& rng, const DegradationSpec& spec, double duration_s,
               int sample_rate) {
  Rng clean_rng = rng.fork(100);
  Pair p;
  p.x0 = synth_clean(clean_rng, duration_s, sample_rate);
  p.y = apply_degradation(p.x0, spec, sample_rate, rng.fork(200));
  return p;
}

EmitResult emit_dataset(const std::string& out_dir, int n,
                        const DegradationSpec& spec, double duration_s,
                        int sample_rate, uint64_t seed) {
  namespace fs = std::filesystem;
  require(n > 0, "emit_dataset: need a positive clip count");
  fs::create_directories(out_dir);

  EmitResult res;
  res.manifest_path = (fs::path(out_dir) / "manifest.csv").string();
  std::ofstream manifest(res.manifest_path);
  require(manifest.good(), "cannot write manifest: ", res.manifest_path);
  manifest << "id,seed,stages,parameters,clean_wav,degraded_wav\n";

  const Rng master(seed);
  for (int i = 0; i < n; ++i) {
    const Rng pair_rng = master.fork(0xC11F, static_cast<uint64_t>(i));
    auto pair = make_pair(pair_rng, spec, duration_s, sample_rate);
    char base[32];
    std::snprintf(base, sizeof(base), "clip_%04d", i);
    const std::string clean_name = std::string(base) + "_clean.wav";
    const std::string degraded_name = std::string(base) + "_degraded.wav";
    dsp::write_wav((fs::path(out_dir) / clean_name).string(), pair.x0,
                   sample_rate, dsp::WavFormat::float32);
    dsp::write_wav((fs::path(out_dir) / degraded_name).string(), pair.y,
                   sample_rate, dsp::WavFormat::float32);
    manifest << i << "," << pair_rng.seed() << "," << spec.stage_list()
             << ",\"" << spec.parameter_summary() << "\"," << clean_name << ","
             << degraded_name << "\n";
    ++res.count;
  }
  res.count = n;
  require(manifest.good(), "failed writing manifest: ", res.manifest_path);
  return res;
}

}  // namespace flowsr::datagen
