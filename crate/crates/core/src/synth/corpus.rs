//! Latin text for language-model training and the word list drawn from it.

/// Chancery-style Latin, several short letters in the register manner.
pub const LATIN_CORPUS: &str = "\
Gregorius episcopus seruus seruorum dei dilecto filio abbati monasterii sancti petri salutem et apostolicam benedictionem. \
Cum a nobis petitur quod iustum est et honestum tam uigor equitatis quam ordo exigit rationis ut id per sollicitudinem \
officii nostri ad debitum perducatur effectum. Eapropter dilecte in domino fili tuis iustis postulationibus grato \
concurrentes assensu monasterium ipsum cum omnibus bonis que in presentiarum rationabiliter possidet sub beati petri et \
nostra protectione suscipimus et presentis scripti patrocinio communimus. Nulli ergo omnino hominum liceat hanc paginam \
nostre protectionis et confirmationis infringere uel ei ausu temerario contraire. Si quis autem hoc attemptare \
presumpserit indignationem omnipotentis dei et beatorum petri et pauli apostolorum eius se nouerit incursurum. \
Datum laterani idibus martii pontificatus nostri anno primo.

Dilectis filiis priori et conuentui monasterii sancte marie salutem et apostolicam benedictionem. Sacrosancta romana \
ecclesia deuotos et humiles filios ex assuete pietatis officio propensius diligere consueuit et ne prauorum hominum \
molestiis agitentur eos tamquam pia mater sue protectionis munimine confouere. Ea propter dilecti in domino filii \
uestris iustis postulationibus clementer annuimus et personas uestras et locum in quo diuino estis obsequio mancipati \
cum omnibus bonis que impresentiarum rationabiliter possidet aut in futurum iustis modis prestante domino poterit \
adipisci sub beati petri et nostra protectione suscipimus. Specialiter autem terras domos uineas prata nemora et alia \
bona uestra sicut ea omnia iuste ac pacifice possidetis uobis et per uos monasterio uestro auctoritate apostolica \
confirmamus et presentis scripti patrocinio communimus. Nulli ergo omnino hominum liceat hanc paginam nostre \
protectionis et confirmationis infringere. Datum anagnie quarto nonas aprilis pontificatus nostri anno secundo.

Uenerabili fratri episcopo salutem et apostolicam benedictionem. Ex parte dilectorum filiorum abbatis et conuentus \
monasterii fuit propositum coram nobis quod nonnulli clerici et laici terras decimas domos possessiones et alia bona \
ad monasterium ipsum spectantia temere occupare presumunt et ea detinent occupata. Quocirca fraternitati tue per \
apostolica scripta mandamus quatinus partibus conuocatis audias causam et appellatione remota debito fine decidas \
faciens quod decreueris per censuram ecclesiasticam firmiter obseruari. Testes autem qui fuerint nominati si se gratia \
odio uel timore subtraxerint censura simili appellatione cessante compellas ueritati testimonium perhibere. Dato \
perusii tertio idus maii pontificatus nostri anno tertio.

Dilecto filio magistro canonico salutem et apostolicam benedictionem. Litterarum scientia uite ac morum honestas et \
alia probitatis merita super quibus apud nos fidedigno commendaris testimonio nos inducunt ut tibi reddamur ad gratiam \
liberales. Cum itaque sicut accepimus canonicatus et prebenda ecclesie uacare noscantur ad presens nos uolentes tibi \
premissorum meritorum tuorum intuitu gratiam facere specialem canonicatum et prebendam huiusmodi cum plenitudine iuris \
canonici ac omnibus iuribus et pertinentiis suis apostolica tibi auctoritate conferimus et de illis etiam prouidemus. \
Nulli ergo omnino hominum liceat hanc paginam nostre collationis et prouisionis infringere. Dato rome apud sanctum \
petrum nonis iunii pontificatus nostri anno quarto.

Uniuersis christi fidelibus presentes litteras inspecturis salutem et apostolicam benedictionem. Quoniam ut ait \
apostolus omnes stabimus ante tribunal christi recepturi prout in corpore gessimus siue bonum fuerit siue malum oportet \
nos diem messionis extreme misericordie operibus preuenire ac eternorum intuitu seminare in terris quod reddente domino \
cum multiplicato fructu recolligere debeamus in celis. Cum igitur ecclesia de qua fit mentio ut accepimus in suis \
edificiis sit collapsa et ad eius reparationem proprie non suppetant facultates uniuersitatem uestram rogamus monemus \
et hortamur in domino in remissionem uobis peccaminum iniungentes quatinus de bonis a deo uobis collatis pias \
elemosinas et grata caritatis subsidia erogetis ut per subuentionem uestram opus huiusmodi ualeat consummari. Nos enim \
de omnipotentis dei misericordia et beatorum petri et pauli apostolorum eius auctoritate confisi omnibus uere penitentibus \
et confessis qui ad hoc manum porrexerint adiutricem centum dies de iniunctis sibi penitentiis misericorditer relaxamus. \
Datum auinione idibus octobris pontificatus nostri anno quinto.

Dilecto filio nobili uiro domino terre salutem et apostolicam benedictionem. Dudum per alias nostras litteras tibi \
dedimus in mandatis ut bona ecclesie que tenes indebite occupata restitueres absque more dispendio. Tu uero sicut \
accepimus huiusmodi mandatis nostris parere non curans ea adhuc detines in anime tue periculum et ecclesie \
preiudicium non modicum et grauamen. Quare nobilitatem tuam rogamus et hortamur attente per apostolica tibi scripta \
mandantes quatinus bona predicta sine difficultate qualibet restituas et de perceptis fructibus satisfacias \
competenter alioquin uenerabili fratri nostro episcopo dedimus in mandatis ut te ad id monitione premissa per censuram \
ecclesiasticam appellatione postposita compellat. Dato auinione sexto kalendas nouembris pontificatus nostri anno \
sexto.

Dilectis filiis capitulo ecclesie salutem et apostolicam benedictionem. Ad audientiam nostram peruenit quod cum \
dilectus filius prepositus uester in ecclesia uestra residere non curet prebende sue fructus percipit et onera debita \
non supportat. Cum autem qui altari seruit de altari uiuere debeat et non alius quam qui in ecclesia deseruit \
fructus illius percipere debeat discretioni uestre per apostolica scripta mandamus quatinus eum ut in ecclesia \
residentiam faciat personalem monere curetis. Quod si forte neglexerit fructus eosdem in utilitatem ecclesie \
conuertatis contradictores per censuram ecclesiasticam compescendo. Dato laterani pridie kalendas ianuarii \
pontificatus nostri anno septimo.

In nomine domini amen. Anno a natiuitate eiusdem millesimo trecentesimo die decima mensis maii in presentia mei \
notarii et testium infrascriptorum dominus abbas dicti monasterii constitutus recognouit se habuisse et recepisse a \
domino episcopo pro se et ecclesia sua certam pecunie quantitatem in qua ipse abbas eidem tenebatur ratione census \
annui quem monasterium ipsum ecclesie romane soluere consueuit. Actum in palatio apostolico presentibus discretis uiris \
fratre petro ordinis minorum et magistro iohanne notario testibus ad premissa uocatis specialiter et rogatis. Et ego \
notarius publicus apostolica et imperiali auctoritate premissis omnibus interfui eaque scripsi et publicaui rogatus. \
Dato ut supra anno domini nostri et die quibus supra.

Dominus uobiscum et cum spiritu tuo. Gloria in excelsis deo et in terra pax hominibus bone uoluntatis. Laudamus te \
benedicimus te adoramus te glorificamus te gratias agimus tibi propter magnam gloriam tuam domine deus rex celestis \
deus pater omnipotens. Pater noster qui es in celis sanctificetur nomen tuum adueniat regnum tuum fiat uoluntas tua \
sicut in celo et in terra. Panem nostrum cotidianum da nobis hodie et dimitte nobis debita nostra sicut et nos dimittimus \
debitoribus nostris. Et ne nos inducas in temptationem sed libera nos a malo amen. Credo in unum deum patrem \
omnipotentem factorem celi et terre uisibilium omnium et inuisibilium. Et in unum dominum filium dei unigenitum et ex \
patre natum ante omnia secula deum de deo lumen de lumine deum uerum de deo uero genitum non factum consubstantialem \
patri per quem omnia facta sunt. Qui propter nos homines et propter nostram salutem descendit de celis. \
Gallia est omnis diuisa in partes tres quarum unam incolunt belge aliam aquitani tertiam qui ipsorum lingua celte \
nostra galli appellantur. Hi omnes lingua institutis legibus inter se differunt. Arma uirumque cano troie qui primus ab \
oris italiam fato profugus lauiniaque uenit litora multum ille et terris iactatus et alto ui superum seue memorem \
iunonis ob iram. Multa quoque et bello passus dum conderet urbem inferretque deos latio genus unde latinum albanique \
patres atque alte menia rome. Tempus fugit et omnia mutantur nos et mutamur in illis. Dum spiro spero et dum \
fata sinunt uiuite leti. Quid sit futurum cras fuge querere et quem fors dierum cumque dabit lucro appone. Nunc est \
bibendum nunc pede libero pulsanda tellus. Dato anno domini et mense et die ut supra. Datum et actum ut supra.
";

/// Sixty words of [`LATIN_CORPUS`], each of two to ten letters.
pub const LEXICON: [&str; 60] = [
    "dato", "datum", "anno", "domini", "dominus", "nostri", "episcopo", "ecclesie", "sancti", "petri",
    "apud", "sanctum", "filio", "salutem", "laterani", "primo", "nomine", "amen", "litteras", "nostras",
    "gratiam", "terra", "presentes", "quod", "cum", "per", "sub", "pro", "capitulo", "monasterii",
    "ordinis", "abbati", "fratre", "tenebatur", "quibus", "omnibus", "nulli", "ergo", "omnino", "hominum",
    "liceat", "hanc", "paginam", "nostre", "ausu", "autem", "dei", "beatorum", "eius", "idibus",
    "martii", "fructus", "mandamus", "quatinus", "bona", "deus", "pater", "celis", "tempus", "fugit",
];
