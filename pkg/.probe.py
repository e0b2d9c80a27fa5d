import time, math, sys
import numpy as np
from scipy import stats
from statusarena.orchestrator import ExperimentConfig, run_experiment

def load_goods(log):
    for r in log:
        if r.kind == "run_start":
            return {g["id"]: g for g in r.payload["catalog"]}
def shares(log):
    goods = load_goods(log)
    st = lambda gid: goods[gid]["category"] in ("Clothing","Accessories") and goods[gid]["tier"] in ("Mid","High")
    bids = [r for r in log if r.kind=="order_submitted" and r.payload["side"]=="Bid"]
    sb = sum(r.payload["quantity"] for r in bids if st(r.payload["good_id"]))
    ab = sum(r.payload["quantity"] for r in bids)
    tr = [r for r in log if r.kind=="trade"]
    sp = sum(r.payload["quantity"] for r in tr if st(r.payload["good_id"]))
    ap = sum(r.payload["quantity"] for r in tr)
    return sb/ab, sp/(ap or 1)
def series(log, gid):
    prices, qtys, last = {}, {}, None
    for r in log:
        if r.kind=="run_start": last = {g["id"]: g["base_price"] for g in r.payload["catalog"]}[gid]
        if r.kind=="clearing" and r.payload["good_id"]==gid:
            rg=r.payload["round_global"]
            if r.payload["best_ask"] is not None: last=r.payload["best_ask"]
            prices[rg]=r.payload["clearing_price"] or last
        if r.kind=="order_submitted" and r.payload["side"]=="Bid" and r.payload["good_id"]==gid:
            rg = r.payload["round_global"]
            qtys[rg] = qtys.get(rg,0)+r.payload["quantity"]
    return [(prices[rg], qtys.get(rg,0)) for rg in sorted(prices) if qtys.get(rg,0)>0 and prices[rg]]
def ols(pts):
    if len(pts)<3: return None,None
    x=np.log([p for p,_ in pts]); y=np.log([q for _,q in pts])
    if x.std()==0: return None,None
    n=len(x); sl,ic=np.polyfit(x,y,1)
    r=y-(sl*x+ic); se=math.sqrt(max(r@r,1e-300)/(n-2)/((x-x.mean())**2).sum())
    return sl, 2*stats.t.sf(abs(sl/se),n-2)
def pooled(log, ids):
    ax, ay, G = [], [], 0
    for g in ids:
        pts = series(log, g)
        if len(pts)>=3:
            G+=1; lx=np.log([p for p,_ in pts]); ly=np.log([q for _,q in pts])
            ax+=list(lx-lx.mean()); ay+=list(ly-ly.mean())
    if not ax: return 0.0,1.0,0
    x,y=np.array(ax),np.array(ay)
    if x.std()==0: return 0.0,1.0,len(x)
    n=len(x); sl,ic=np.polyfit(x,y,1)
    r=y-(sl*x+ic); dof=max(n-G-1,1)
    se=math.sqrt((r@r)/dof/((x-x.mean())**2).sum())
    return sl, 2*stats.t.sf(abs(sl/se),dof), n

foods=["street_taco","instant_ramen_cup","farmers_market_salad","woodfired_margherita_pizza","omakase_sushi_platter","wagyu_steak_dinner"]
nseeds = int(sys.argv[1]) if len(sys.argv)>1 else 5
S,N,F,LAB,FOOD = [],[],[],[],[]
t0=time.time()
for seed in range(nseeds):
    ls = run_experiment(ExperimentConfig(), seed)
    ln = run_experiment(ExperimentConfig(social=False), seed)
    lf = run_experiment(ExperimentConfig(fixed_price=True), seed)
    s,_=shares(ls); n,_=shares(ln); f,_=shares(lf)
    S.append(s); N.append(n); F.append(f)
    LAB.append(ols(series(ls,"labubu_plush_doll")))
    FOOD.append(pooled(ls,foods))
    print(f"seed {seed}: s={s:.3f} n={n:.3f} f={f:.3f} gap={s-n:+.3f} f-s={f-s:+.3f} "
          f"labubu=({'None' if LAB[-1][0] is None else round(LAB[-1][0],2)},{LAB[-1][1] if LAB[-1][1] is None else round(LAB[-1][1],3)}) "
          f"food=({FOOD[-1][0]:.2f},{FOOD[-1][1]:.4f},n={FOOD[-1][2]})")
S,N,F = np.array(S),np.array(N),np.array(F)
t,pv = stats.ttest_ind(S,N,equal_var=False)
lab_ok = sum(1 for sl,p_ in LAB if sl and sl>0 and p_<0.05)
food_ok = sum(1 for sl,p_,_ in FOOD if sl<0 and p_<0.05)
print(f"SUMMARY: gap={S.mean()-N.mean():+.3f} (p={pv:.1e}) f-s={F.mean()-S.mean():+.3f} ({sum(F>=S)}/{nseeds} f>=s) labubu {lab_ok}/{nseeds} food {food_ok}/{nseeds} [{time.time()-t0:.0f}s]")
