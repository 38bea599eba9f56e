"""
Example Run Script - Demonstrates a full birthchain analysis
This script analyzes the bundled uniform catastrophe model and saves outputs
"""

import os
import sys
from datetime import datetime

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from core.config import load_options
from core.criteria import analyze, laplace_return
from core.reports import ReportGenerator
from core.sequences import SequenceTable
from core.simulator import Caps, estimate_return_time_moment
from core.specs import load_model


def main():
    print("=" * 70)
    print("birthchain - Example Run")
    print("=" * 70)
    print()

    model_path = os.path.join('models', 'uniform_catastrophe_a2b3.json')
    try:
        opts, sim, out = load_options('config.json')
        model = load_model(model_path)
        N = opts.truncation

        print(f"📋 Model: {model.name}")
        for key, value in model.describe().items():
            print(f"   {key}: {value}")
        print(f"   Truncation N: {N}")
        print()

        print("⏳ Running every criterion...")
        report = analyze(model, N, opts, lam=0.5, ell=1, mz=True)
        print(f"✅ Analysis finished in {report.wall_time:.2f}s")
        print()

        print("=" * 70)
        print("📊 VERDICTS")
        print("=" * 70)
        for name, status in report.verdicts.items():
            print(f"{name:20} {status}")
        print()

        print("=" * 70)
        print("📈 QUANTITIES")
        print("=" * 70)
        print(f"d                    {report['d'].value}")
        print(f"E_0 sigma_0          {report['E0_sigma0'].value}")
        laplace = laplace_return(model, 0.5, N, opts)
        print(f"E_n exp(-sigma_0/2)  {', '.join(f'{x:.6f}' for x in laplace.head(6))}")
        print()

        print("=" * 70)
        print("🎲 MONTE CARLO CHECK")
        print("=" * 70)
        estimate = estimate_return_time_moment(model, 0, 1, samples=sim.samples,
                                               caps=Caps.default(model, 100, sim), seed=sim.seed, opts=sim)
        print(f"E_0 sigma_0 (simulated) {estimate.mean:.6f} +- {estimate.std_error:.2g}")
        print()

        print("=" * 70)
        print("📄 GENERATING REPORTS")
        print("=" * 70)
        report_gen = ReportGenerator(out.human_digits)
        os.makedirs(out.outputs_dir, exist_ok=True)
        stamp = datetime.now().strftime('%Y%m%d')

        json_path = os.path.join(out.outputs_dir, f"example_report_{stamp}.json")
        with open(json_path, 'w') as f:
            f.write(report.to_json(out.json_indent))
        print(f"   ✅ JSON report saved: {json_path}")

        sequences = SequenceTable(model, None, 50).to_frame()
        excel_path = os.path.join(out.outputs_dir, f"example_report_{stamp}.xlsx")
        report_gen.generate_excel(report, excel_path, sequences)
        print(f"   ✅ Excel report saved: {excel_path}")

        csv_path = os.path.join(out.outputs_dir, f"example_sequences_{stamp}.csv")
        report_gen.generate_csv(sequences, csv_path)
        print(f"   ✅ CSV sequences saved: {csv_path}")
        print()

        print("=" * 70)
        print("✅ EXAMPLE RUN COMPLETED SUCCESSFULLY")
        print("=" * 70)
        print()
        print(f"📁 Reports saved in: {out.outputs_dir}/")
        print("🚀 To run the reproduction suite: python app.py reproduce")
        print()

    except Exception as e:
        print(f"❌ Error: {str(e)}")
        print()
        print("💡 Make sure:")
        print("   1. All dependencies are installed: pip install -r requirements.txt")
        print("   2. config.json and models/ exist")
        import traceback
        traceback.print_exc()
        return 1

    return 0


if __name__ == "__main__":
    exit(main())
