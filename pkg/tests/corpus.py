"""Query corpus shared by the round-trip, equivalence and exit-code tests."""

from procgraph.datasets import MESSAGE_QUERY, VENDOR_QUERY

ENTITY_STATEMENTS = [
    r"entity artifact \category='home-loan' AND \submission-branch='Sydney'",
    r"entity artifact \category='home-loan' AND \submission-branch='Sydney' AND \delivery-days>='5' AND \delivery-days<='20'",
    r"entity vendor",
    r"entity offer \delivery-days<'10' OR \product='fixed'",
    r"entity artifact NOT \submission-branch='Sydney'",
    r"entity review (\rating>='4' OR \reviewer='user0') AND NOT \rating='5'",
    r"entity message \requestsize!='2'",
]

SELECT_QUERIES = [
    MESSAGE_QUERY,
    MESSAGE_QUERY.replace("t1", "2").replace("t2", "8"),
    VENDOR_QUERY,
    "select ?vendor ?offer where { ?offer vendor ?vendor. ?vendor @country ?c. ?offer @delivery-days ?d. FILTER (?d > 10 || ?c = 'NZ') }",
    "select ?r ?o ?v where { ?r review-for ?o. ?o vendor ?v. ?r @rating ?x. ?v @name ?n }",
    "select * where { ?a part-of ?b. ?b @type ?t }",
    "select ?s ?p where { ?s ?p ?o. ?o @type 'offer' }",
    "select ?e where { ?e @type ?t. FILTER (?t = 'review' && !(?t = 'offer')) }",
    "select ?x ?y where { ?x submitted ?y. ?y submitted ?z }",
    "select ?m ?t where { ?m @timestamp ?t. ?m @requestsize ?t }",
    "select ?a where { ?a @rating 5 }",
    "select ?a ?b where { ?a @name ?n. ?b @name ?n. ?a @type 'vendor'. ?b @type 'artifact' }",
    "select ?a where { ?a ?p ?a }",
]

QUERY_CORPUS = ENTITY_STATEMENTS + SELECT_QUERIES

OTHER_STATEMENTS = [
    "correlation x.type = y.type",
    "correlation x.order-id = y.order-id into orders timed",
    "correlation x.author = y.who within version",
    "relationship Adam (edge node)* assigned-to STAFF",
    "relationship Adam (edge node)* edge Artifact into found",
    "relationship node (edge @type=activity)+ edge node into folder touched timed",
    r"metadata evolutionOf Adam_loan_document_v2 \what='lifecycle' \how='create'",
    "evolutionOf Adam_loan_document_v2",
    "derivationOf Adam_loan_document_v2",
    r"timeseriesOf Tim \why='fraud'",
    "metadata timeseriesOf Adam_loan_document filter [who='Tim', when>='2017-12-01']",
]
